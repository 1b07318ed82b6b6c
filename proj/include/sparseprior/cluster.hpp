#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sparseprior/rng.hpp"

// K-means on embeddings plus the four clustering scores (NMI, AMI,
// homogeneity, completeness) and a PCA projection for plotting
// higher-dimensional latents. Natural-log entropies throughout; AMI uses the
// exact expected mutual information under the permutation model.

namespace sparseprior::cluster {

struct KmeansResult {
    std::vector<int> labels;
    std::vector<double> centroids;  // k x dim, row-major
    double inertia = 0.0;
    int restarts = 0;
};

// k-means++ seeding, Lloyd iterations to an assignment fixpoint (<= 300),
// empty clusters re-seeded to the point farthest from its centroid, best of
// `restarts` runs by inertia. Deterministic per seed.
KmeansResult kmeans(const std::vector<double>& points, long n, long dim, long k,
                    std::uint64_t seed, int restarts = 10, int max_iters = 300);

// Nearest-centroid assignment of new points to an existing clustering.
std::vector<int> assign_to_centroids(const std::vector<double>& points, long n, long dim,
                                     const std::vector<double>& centroids, long k);

struct Contingency {
    std::vector<long long> counts;  // classes x clusters, row-major
    std::vector<long long> row_marginals;
    std::vector<long long> col_marginals;
    long classes = 0;
    long clusters = 0;
    long long total = 0;
};

Contingency contingency(const std::vector<int>& y_true, const std::vector<int>& y_pred);

double mutual_info(const Contingency& c);              // nats
double entropy(const std::vector<long long>& marginals, long long total);

// Exact expected MI over the hypergeometric permutation null.
double expected_mutual_info(const Contingency& c);

// Degenerate conventions: both entropies zero -> 1, exactly one zero -> 0.
double nmi(const std::vector<int>& y_true, const std::vector<int>& y_pred);
double ami(const std::vector<int>& y_true, const std::vector<int>& y_pred);
std::pair<double, double> homogeneity_completeness(const std::vector<int>& y_true,
                                                   const std::vector<int>& y_pred);

struct PcaResult {
    std::vector<double> projected;    // n x dims
    std::vector<double> eigenvalues;  // all of them, descending
    std::vector<double> components;   // dims x dim (row per component)
};

// Mean-centered projection onto the top eigenvectors of the covariance
// (sample normalization, n-1). Component signs fixed so the largest-magnitude
// loading is positive.
PcaResult pca_project(const std::vector<double>& points, long n, long dim, long out_dims);

}  // namespace sparseprior::cluster
