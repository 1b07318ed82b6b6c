#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseprior/preprocess.hpp"

// Synthetic count-matrix generator drawing from the ZINB generative model:
// per-cell library scale (log-normal), per-gene NB counts via a gamma-Poisson
// mixture, and independent excess-zero dropout with probability
// sigmoid(dropout_logit). Cluster structure comes from distinct per-cluster
// gene profiles.

namespace sparseprior::synth {

struct SynthSpec {
    long clusters = 3;
    long cells_per_cluster = 500;
    long total_cells = 0;  // when > 0, overrides cells_per_cluster (spread as evenly as possible)
    long genes = 200;
    double dispersion = 0.5;       // NB alpha, > 0
    double dropout_logit = 0.0;    // pi = sigmoid(l)
    double lib_log_mean = 7.0;     // log library scale ~ N(lib_log_mean, lib_log_sd)
    double lib_log_sd = 0.3;       // >= 0
    double marker_fraction = 0.15; // per-cluster block of upregulated genes
    double marker_fold = 8.0;
    double base_log_sd = 0.25;     // lognormal jitter on the shared base profile
    std::uint64_t seed = 1;
    // Explicit per-cluster mean profiles (clusters x genes); generated from the
    // marker parameters when absent. Rows are normalized to sum to one.
    std::optional<std::vector<std::vector<double>>> profiles;

    void validate() const;
};

SynthSpec spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json spec_to_json(const SynthSpec& s);

struct SynthResult {
    prep::CountMatrix counts;
    std::vector<int> labels;                       // true cluster per cell
    std::vector<std::vector<double>> profiles;     // normalized means actually used
};

SynthResult generate(const SynthSpec& spec);

}  // namespace sparseprior::synth
