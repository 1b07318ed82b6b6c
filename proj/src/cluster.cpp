#include "sparseprior/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace sparseprior::cluster {

namespace {

double dist2(const double* a, const double* b, long dim) {
    double acc = 0.0;
    for (long j = 0; j < dim; ++j) {
        const double d = a[j] - b[j];
        acc += d * d;
    }
    return acc;
}

struct LloydOut {
    std::vector<int> labels;
    std::vector<double> centroids;
    double inertia = 0.0;
};

LloydOut run_once(const std::vector<double>& pts, long n, long dim, long k, Rng rng,
                  int max_iters) {
    std::vector<double> centroids(static_cast<std::size_t>(k) * dim);
    // k-means++ seeding
    {
        const long first = static_cast<long>(rng.below(static_cast<std::uint64_t>(n)));
        std::copy(pts.begin() + first * dim, pts.begin() + (first + 1) * dim, centroids.begin());
        std::vector<double> d2(static_cast<std::size_t>(n));
        for (long c = 1; c < k; ++c) {
            double total = 0.0;
            for (long i = 0; i < n; ++i) {
                double best = dist2(&pts[i * dim], &centroids[0], dim);
                for (long cc = 1; cc < c; ++cc)
                    best = std::min(best, dist2(&pts[i * dim], &centroids[cc * dim], dim));
                d2[i] = best;
                total += best;
            }
            long pick;
            if (total > 0.0) {
                const double u = rng.uniform() * total;
                double cum = 0.0;
                pick = n - 1;
                for (long i = 0; i < n; ++i) {
                    cum += d2[i];
                    if (cum > u) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<long>(rng.below(static_cast<std::uint64_t>(n)));
            }
            std::copy(pts.begin() + pick * dim, pts.begin() + (pick + 1) * dim,
                      centroids.begin() + c * dim);
        }
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    std::vector<int> prev(labels);
    for (int iter = 0; iter < max_iters; ++iter) {
#pragma omp parallel for schedule(static) if (n * dim * k > 16384)
        for (long i = 0; i < n; ++i) {
            double best = dist2(&pts[i * dim], &centroids[0], dim);
            int arg = 0;
            for (long c = 1; c < k; ++c) {
                const double d = dist2(&pts[i * dim], &centroids[c * dim], dim);
                if (d < best) {
                    best = d;
                    arg = static_cast<int>(c);
                }
            }
            labels[i] = arg;
        }

        std::vector<long> sizes(static_cast<std::size_t>(k), 0);
        std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
        for (long i = 0; i < n; ++i) {
            ++sizes[labels[i]];
            for (long j = 0; j < dim; ++j) sums[labels[i] * dim + j] += pts[i * dim + j];
        }
        // re-seed empties to the point farthest from its own centroid
        std::vector<char> grabbed(static_cast<std::size_t>(n), 0);
        for (long c = 0; c < k; ++c) {
            if (sizes[c] > 0) {
                for (long j = 0; j < dim; ++j) centroids[c * dim + j] = sums[c * dim + j] / sizes[c];
                continue;
            }
            long far = -1;
            double far_d = -1.0;
            for (long i = 0; i < n; ++i) {
                if (grabbed[i]) continue;
                const double d = dist2(&pts[i * dim], &centroids[labels[i] * dim], dim);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            grabbed[far] = 1;
            std::copy(pts.begin() + far * dim, pts.begin() + (far + 1) * dim,
                      centroids.begin() + c * dim);
        }

        if (labels == prev) break;
        prev = labels;
    }

    LloydOut out;
    out.labels = std::move(labels);
    out.centroids = std::move(centroids);
    for (long i = 0; i < n; ++i)
        out.inertia += dist2(&pts[i * dim], &out.centroids[out.labels[i] * dim], dim);
    return out;
}

}  // namespace

KmeansResult kmeans(const std::vector<double>& points, long n, long dim, long k,
                    std::uint64_t seed, int restarts, int max_iters) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (k > n) throw std::invalid_argument("kmeans: k exceeds the number of points");
    if (static_cast<long>(points.size()) != n * dim)
        throw std::invalid_argument("kmeans: points size does not match n x dim");

    KmeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    best.restarts = restarts;
    for (int r = 0; r < restarts; ++r) {
        LloydOut out = run_once(points, n, dim, k, Rng::stream(seed, "kmeans/restart", r),
                                max_iters);
        if (out.inertia < best.inertia) {
            best.inertia = out.inertia;
            best.labels = std::move(out.labels);
            best.centroids = std::move(out.centroids);
        }
    }
    return best;
}

std::vector<int> assign_to_centroids(const std::vector<double>& points, long n, long dim,
                                     const std::vector<double>& centroids, long k) {
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        double bestd = dist2(&points[i * dim], &centroids[0], dim);
        int arg = 0;
        for (long c = 1; c < k; ++c) {
            const double d = dist2(&points[i * dim], &centroids[c * dim], dim);
            if (d < bestd) {
                bestd = d;
                arg = static_cast<int>(c);
            }
        }
        labels[i] = arg;
    }
    return labels;
}

// ---- information-theoretic scores ---------------------------------------------

Contingency contingency(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("labelings differ in length: " +
                                    std::to_string(y_true.size()) + " vs " +
                                    std::to_string(y_pred.size()));
    if (y_true.empty()) throw std::invalid_argument("labelings are empty");
    std::map<int, long> tmap, pmap;
    for (int v : y_true) tmap.emplace(v, 0);
    for (int v : y_pred) pmap.emplace(v, 0);
    long idx = 0;
    for (auto& [k, v] : tmap) v = idx++;
    idx = 0;
    for (auto& [k, v] : pmap) v = idx++;

    Contingency c;
    c.classes = static_cast<long>(tmap.size());
    c.clusters = static_cast<long>(pmap.size());
    c.total = static_cast<long long>(y_true.size());
    c.counts.assign(static_cast<std::size_t>(c.classes) * c.clusters, 0);
    c.row_marginals.assign(static_cast<std::size_t>(c.classes), 0);
    c.col_marginals.assign(static_cast<std::size_t>(c.clusters), 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const long r = tmap[y_true[i]], col = pmap[y_pred[i]];
        ++c.counts[r * c.clusters + col];
        ++c.row_marginals[r];
        ++c.col_marginals[col];
    }
    return c;
}

double mutual_info(const Contingency& c) {
    const double n = static_cast<double>(c.total);
    double mi = 0.0;
    for (long i = 0; i < c.classes; ++i)
        for (long j = 0; j < c.clusters; ++j) {
            const long long nij = c.counts[i * c.clusters + j];
            if (nij == 0) continue;
            mi += (static_cast<double>(nij) / n) *
                  std::log(n * static_cast<double>(nij) /
                           (static_cast<double>(c.row_marginals[i]) *
                            static_cast<double>(c.col_marginals[j])));
        }
    return mi;
}

double entropy(const std::vector<long long>& marginals, long long total) {
    double h = 0.0;
    for (long long m : marginals) {
        if (m == 0) continue;
        const double p = static_cast<double>(m) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

double expected_mutual_info(const Contingency& c) {
    const long long n = c.total;
    // log-factorials up to n via a cumulative sum
    std::vector<double> lf(static_cast<std::size_t>(n) + 1, 0.0);
    for (long long i = 2; i <= n; ++i)
        lf[static_cast<std::size_t>(i)] =
            lf[static_cast<std::size_t>(i) - 1] + std::log(static_cast<double>(i));
    auto logf = [&](long long v) { return lf[static_cast<std::size_t>(v)]; };

    double emi = 0.0;
    for (long i = 0; i < c.classes; ++i) {
        const long long a = c.row_marginals[i];
        for (long j = 0; j < c.clusters; ++j) {
            const long long b = c.col_marginals[j];
            const long long lo = std::max<long long>(1, a + b - n);
            const long long hi = std::min(a, b);
            for (long long nij = lo; nij <= hi; ++nij) {
                const double term = (static_cast<double>(nij) / n) *
                                    std::log(static_cast<double>(n) * nij /
                                             (static_cast<double>(a) * b));
                const double logp = logf(a) + logf(b) + logf(n - a) + logf(n - b) - logf(n) -
                                    logf(nij) - logf(a - nij) - logf(b - nij) -
                                    logf(n - a - b + nij);
                emi += term * std::exp(logp);
            }
        }
    }
    return emi;
}

double nmi(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    const Contingency c = contingency(y_true, y_pred);
    const double ht = entropy(c.row_marginals, c.total);
    const double hp = entropy(c.col_marginals, c.total);
    if (ht == 0.0 && hp == 0.0) return 1.0;
    if (ht == 0.0 || hp == 0.0) return 0.0;
    return mutual_info(c) / std::sqrt(ht * hp);
}

double ami(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    const Contingency c = contingency(y_true, y_pred);
    const double ht = entropy(c.row_marginals, c.total);
    const double hp = entropy(c.col_marginals, c.total);
    if (ht == 0.0 && hp == 0.0) return 1.0;
    if (ht == 0.0 || hp == 0.0) return 0.0;
    const double mi = mutual_info(c);
    const double emi = expected_mutual_info(c);
    const double denom = 0.5 * (ht + hp) - emi;
    if (denom == 0.0) return 0.0;
    return (mi - emi) / denom;
}

std::pair<double, double> homogeneity_completeness(const std::vector<int>& y_true,
                                                   const std::vector<int>& y_pred) {
    const Contingency c = contingency(y_true, y_pred);
    const double n = static_cast<double>(c.total);
    const double ht = entropy(c.row_marginals, c.total);
    const double hp = entropy(c.col_marginals, c.total);

    double h_t_given_p = 0.0, h_p_given_t = 0.0;
    for (long i = 0; i < c.classes; ++i)
        for (long j = 0; j < c.clusters; ++j) {
            const long long nij = c.counts[i * c.clusters + j];
            if (nij == 0) continue;
            const double p = static_cast<double>(nij) / n;
            h_t_given_p -= p * std::log(static_cast<double>(nij) /
                                        static_cast<double>(c.col_marginals[j]));
            h_p_given_t -= p * std::log(static_cast<double>(nij) /
                                        static_cast<double>(c.row_marginals[i]));
        }
    const double homogeneity = ht == 0.0 ? 1.0 : 1.0 - h_t_given_p / ht;
    const double completeness = hp == 0.0 ? 1.0 : 1.0 - h_p_given_t / hp;
    return {homogeneity, completeness};
}

// ---- PCA ------------------------------------------------------------------------

PcaResult pca_project(const std::vector<double>& points, long n, long dim, long out_dims) {
    if (out_dims < 1 || out_dims > dim)
        throw std::invalid_argument("pca: output dims must lie in [1, dim]");
    if (n < 2) throw std::invalid_argument("pca: need at least two points");

    std::vector<double> centered(points);
    for (long j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (long i = 0; i < n; ++i) mean += centered[i * dim + j];
        mean /= static_cast<double>(n);
        for (long i = 0; i < n; ++i) centered[i * dim + j] -= mean;
    }

    // covariance, sample-normalized
    std::vector<double> cov(static_cast<std::size_t>(dim) * dim, 0.0);
    for (long i = 0; i < n; ++i)
        for (long a = 0; a < dim; ++a)
            for (long b = a; b < dim; ++b)
                cov[a * dim + b] += centered[i * dim + a] * centered[i * dim + b];
    for (long a = 0; a < dim; ++a)
        for (long b = a; b < dim; ++b) {
            cov[a * dim + b] /= static_cast<double>(n - 1);
            cov[b * dim + a] = cov[a * dim + b];
        }

    // cyclic Jacobi eigendecomposition of the symmetric covariance
    std::vector<double> v(static_cast<std::size_t>(dim) * dim, 0.0);
    for (long i = 0; i < dim; ++i) v[i * dim + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (long p = 0; p < dim; ++p)
            for (long q = p + 1; q < dim; ++q) off += cov[p * dim + q] * cov[p * dim + q];
        if (off < 1e-24) break;
        for (long p = 0; p < dim; ++p)
            for (long q = p + 1; q < dim; ++q) {
                const double apq = cov[p * dim + q];
                if (std::abs(apq) < 1e-300) continue;
                const double app = cov[p * dim + p], aqq = cov[q * dim + q];
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cth = 1.0 / std::sqrt(t * t + 1.0);
                const double sth = t * cth;
                for (long r = 0; r < dim; ++r) {
                    const double arp = cov[r * dim + p], arq = cov[r * dim + q];
                    cov[r * dim + p] = cth * arp - sth * arq;
                    cov[r * dim + q] = sth * arp + cth * arq;
                }
                for (long r = 0; r < dim; ++r) {
                    const double apr = cov[p * dim + r], aqr = cov[q * dim + r];
                    cov[p * dim + r] = cth * apr - sth * aqr;
                    cov[q * dim + r] = sth * apr + cth * aqr;
                }
                for (long r = 0; r < dim; ++r) {
                    const double vrp = v[r * dim + p], vrq = v[r * dim + q];
                    v[r * dim + p] = cth * vrp - sth * vrq;
                    v[r * dim + q] = sth * vrp + cth * vrq;
                }
            }
    }

    std::vector<long> order(dim);
    for (long i = 0; i < dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](long a, long b) { return cov[a * dim + a] > cov[b * dim + b]; });

    PcaResult res;
    res.eigenvalues.resize(dim);
    res.components.assign(static_cast<std::size_t>(out_dims) * dim, 0.0);
    for (long c = 0; c < dim; ++c) res.eigenvalues[c] = cov[order[c] * dim + order[c]];
    for (long c = 0; c < out_dims; ++c) {
        // sign convention: the largest-magnitude loading points up
        long arg = 0;
        double best = std::abs(v[0 * dim + order[c]]);
        for (long r = 1; r < dim; ++r)
            if (std::abs(v[r * dim + order[c]]) > best) {
                best = std::abs(v[r * dim + order[c]]);
                arg = r;
            }
        const double s = v[arg * dim + order[c]] < 0.0 ? -1.0 : 1.0;
        for (long r = 0; r < dim; ++r) res.components[c * dim + r] = s * v[r * dim + order[c]];
    }

    res.projected.assign(static_cast<std::size_t>(n) * out_dims, 0.0);
    for (long i = 0; i < n; ++i)
        for (long c = 0; c < out_dims; ++c) {
            double acc = 0.0;
            for (long j = 0; j < dim; ++j) acc += centered[i * dim + j] * res.components[c * dim + j];
            res.projected[i * out_dims + c] = acc;
        }
    return res;
}

}  // namespace sparseprior::cluster
