#include "sparseprior/synth.hpp"

#include <cmath>
#include <stdexcept>

namespace sparseprior::synth {

void SynthSpec::validate() const {
    if (clusters < 1) throw prep::ValidationError("synth: clusters must be >= 1");
    if (cells_per_cluster < 1) throw prep::ValidationError("synth: cells_per_cluster must be >= 1");
    if (total_cells < 0) throw prep::ValidationError("synth: total_cells must be >= 0");
    if (total_cells > 0 && total_cells < clusters)
        throw prep::ValidationError("synth: total_cells must cover every cluster");
    if (genes < 1) throw prep::ValidationError("synth: genes must be >= 1");
    if (!(dispersion > 0.0)) throw prep::ValidationError("synth: dispersion must be positive");
    if (!(lib_log_sd >= 0.0)) throw prep::ValidationError("synth: lib_log_sd must be >= 0");
    if (!(marker_fraction >= 0.0) || !(marker_fraction <= 1.0))
        throw prep::ValidationError("synth: marker_fraction must lie in [0, 1]");
    if (!(marker_fold > 0.0)) throw prep::ValidationError("synth: marker_fold must be positive");
    if (profiles) {
        if (static_cast<long>(profiles->size()) != clusters)
            throw prep::ValidationError("synth: profiles must have one row per cluster");
        for (const auto& row : *profiles) {
            if (static_cast<long>(row.size()) != genes)
                throw prep::ValidationError("synth: profile row width must equal genes");
            double total = 0.0;
            for (double v : row) {
                if (!(v >= 0.0)) throw prep::ValidationError("synth: profile values must be >= 0");
                total += v;
            }
            if (!(total > 0.0)) throw prep::ValidationError("synth: profile row sums to zero");
        }
        for (std::size_t a = 0; a < profiles->size(); ++a)
            for (std::size_t b = a + 1; b < profiles->size(); ++b)
                if ((*profiles)[a] == (*profiles)[b])
                    throw prep::ValidationError("synth: cluster mean profiles must be distinct");
    }
}

SynthSpec spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    s.clusters = j.value("clusters", s.clusters);
    s.cells_per_cluster = j.value("cells_per_cluster", s.cells_per_cluster);
    s.total_cells = j.value("total_cells", s.total_cells);
    s.genes = j.value("genes", s.genes);
    s.dispersion = j.value("dispersion", s.dispersion);
    s.dropout_logit = j.value("dropout_logit", s.dropout_logit);
    s.lib_log_mean = j.value("lib_log_mean", s.lib_log_mean);
    s.lib_log_sd = j.value("lib_log_sd", s.lib_log_sd);
    s.marker_fraction = j.value("marker_fraction", s.marker_fraction);
    s.marker_fold = j.value("marker_fold", s.marker_fold);
    s.base_log_sd = j.value("base_log_sd", s.base_log_sd);
    s.seed = j.value("seed", s.seed);
    if (j.contains("profiles"))
        s.profiles = j.at("profiles").get<std::vector<std::vector<double>>>();
    s.validate();
    return s;
}

nlohmann::ordered_json spec_to_json(const SynthSpec& s) {
    nlohmann::ordered_json j;
    j["clusters"] = s.clusters;
    j["cells_per_cluster"] = s.cells_per_cluster;
    if (s.total_cells > 0) j["total_cells"] = s.total_cells;
    j["genes"] = s.genes;
    j["dispersion"] = s.dispersion;
    j["dropout_logit"] = s.dropout_logit;
    j["lib_log_mean"] = s.lib_log_mean;
    j["lib_log_sd"] = s.lib_log_sd;
    j["marker_fraction"] = s.marker_fraction;
    j["marker_fold"] = s.marker_fold;
    j["base_log_sd"] = s.base_log_sd;
    j["seed"] = s.seed;
    if (s.profiles) j["profiles"] = *s.profiles;
    return j;
}

namespace {

std::vector<std::vector<double>> build_profiles(const SynthSpec& s, Rng& rng) {
    if (s.profiles) {
        auto rows = *s.profiles;
        for (auto& row : rows) {
            double total = 0.0;
            for (double v : row) total += v;
            for (auto& v : row) v /= total;
        }
        return rows;
    }
    // shared lognormal base, then a distinct marker block per cluster
    std::vector<double> base(static_cast<std::size_t>(s.genes));
    for (auto& v : base) v = std::exp(rng.normal(0.0, s.base_log_sd));
    const long block = std::max<long>(1, static_cast<long>(s.marker_fraction * s.genes));
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(s.clusters), base);
    for (long c = 0; c < s.clusters; ++c) {
        const long lo = (c * block) % s.genes;
        for (long i = 0; i < block; ++i) rows[c][(lo + i) % s.genes] *= s.marker_fold;
        double total = 0.0;
        for (double v : rows[c]) total += v;
        for (auto& v : rows[c]) v /= total;
    }
    return rows;
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    Rng profile_rng = Rng::stream(spec.seed, "synth/profiles");
    Rng draw_rng = Rng::stream(spec.seed, "synth/draws");

    SynthResult res;
    res.profiles = build_profiles(spec, profile_rng);

    const double pi = 1.0 / (1.0 + std::exp(-spec.dropout_logit));
    const double shape = 1.0 / spec.dispersion;  // gamma-Poisson mixture gives NB(mu, alpha)

    // cluster sizes: equal blocks, or an even spread of total_cells
    std::vector<long> sizes(static_cast<std::size_t>(spec.clusters), spec.cells_per_cluster);
    if (spec.total_cells > 0)
        for (long c = 0; c < spec.clusters; ++c)
            sizes[static_cast<std::size_t>(c)] =
                spec.total_cells / spec.clusters + (c < spec.total_cells % spec.clusters ? 1 : 0);
    std::vector<int> label_of;
    for (long c = 0; c < spec.clusters; ++c)
        label_of.insert(label_of.end(), sizes[static_cast<std::size_t>(c)], static_cast<int>(c));

    prep::CountMatrix& m = res.counts;
    m.n_cells = static_cast<long>(label_of.size());
    m.n_genes = spec.genes;
    for (long g = 0; g < spec.genes; ++g) m.gene_ids.push_back("g" + std::to_string(g + 1));

    for (long cell = 0; cell < m.n_cells; ++cell) {
        const int label = label_of[static_cast<std::size_t>(cell)];
        res.labels.push_back(label);
        m.cell_ids.push_back("cell" + std::to_string(cell + 1));
        const double library = std::exp(draw_rng.normal(spec.lib_log_mean, spec.lib_log_sd));
        const auto& profile = res.profiles[static_cast<std::size_t>(label)];
        for (long g = 0; g < spec.genes; ++g) {
            const double drop = draw_rng.uniform();
            if (drop < pi) continue;  // excess zero
            const double mu = library * profile[static_cast<std::size_t>(g)];
            if (mu <= 0.0) continue;
            const double lambda = draw_rng.gamma(shape, spec.dispersion * mu);
            const long long count = lambda > 0.0 ? draw_rng.poisson(lambda) : 0;
            if (count > 0) m.entries.push_back({cell, g, count});
        }
    }
    m.validate();
    return res;
}

}  // namespace sparseprior::synth
