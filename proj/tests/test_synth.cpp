#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sparseprior/synth.hpp"

using namespace sparseprior;

TEST_CASE("same seed reproduces the matrix exactly") {
    synth::SynthSpec s;
    s.clusters = 2;
    s.cells_per_cluster = 40;
    s.genes = 30;
    s.seed = 5;
    const auto a = synth::generate(s);
    const auto b = synth::generate(s);
    CHECK(a.counts.to_dense() == b.counts.to_dense());
    CHECK(a.labels == b.labels);
}

TEST_CASE("labels follow the cluster blocks and profiles are distinct") {
    synth::SynthSpec s;
    s.clusters = 3;
    s.cells_per_cluster = 5;
    s.genes = 40;
    const auto r = synth::generate(s);
    for (long c = 0; c < 15; ++c) CHECK(r.labels[c] == c / 5);
    CHECK(r.profiles.size() == 3);
    CHECK(r.profiles[0] != r.profiles[1]);
    CHECK(r.profiles[1] != r.profiles[2]);
}

TEST_CASE("empirical zero fraction matches pi + (1-pi) f_NB(0)") {
    // mu = 1, alpha = 1, pi = 0.5: zero fraction 0.5 + 0.5 * 0.5 = 0.75
    synth::SynthSpec s;
    s.clusters = 1;
    s.cells_per_cluster = 10000;
    s.genes = 1;
    s.dispersion = 1.0;
    s.dropout_logit = 0.0;  // pi = 0.5
    s.lib_log_mean = 0.0;   // library scale exactly 1, profile sums to 1 -> mu = 1
    s.lib_log_sd = 0.0;
    s.seed = 11;
    const auto r = synth::generate(s);
    const double zeros =
        static_cast<double>(10000 - static_cast<long>(r.counts.entries.size())) / 10000.0;
    CHECK(std::abs(zeros - 0.75) < 0.01);
}

TEST_CASE("poisson limit: variance approaches the mean as dispersion vanishes") {
    synth::SynthSpec s;
    s.clusters = 1;
    s.cells_per_cluster = 10000;
    s.genes = 1;
    s.dispersion = 1e-3;
    s.dropout_logit = -40.0;  // pi ~ 0
    s.lib_log_mean = std::log(20.0);
    s.lib_log_sd = 0.0;
    s.seed = 13;
    const auto r = synth::generate(s);
    const auto dense = r.counts.to_dense();
    double mean = 0.0;
    for (double v : dense) mean += v;
    mean /= 10000.0;
    double var = 0.0;
    for (double v : dense) var += (v - mean) * (v - mean);
    var /= 10000.0;
    CHECK(std::abs(var - mean) / mean < 0.10);
}

TEST_CASE("explicit profiles are validated") {
    synth::SynthSpec s;
    s.clusters = 2;
    s.cells_per_cluster = 3;
    s.genes = 2;
    s.profiles = {{1.0, 2.0}, {1.0, 2.0}};
    CHECK_THROWS_AS(synth::generate(s), prep::ValidationError);
    s.profiles = {{1.0, 2.0}, {2.0, 1.0}};
    CHECK_NOTHROW(synth::generate(s));
    s.profiles = {{0.0, 0.0}, {2.0, 1.0}};
    CHECK_THROWS_AS(synth::generate(s), prep::ValidationError);
}

TEST_CASE("spec json round trip") {
    synth::SynthSpec s;
    s.clusters = 4;
    s.dropout_logit = -0.405;
    s.seed = 99;
    const auto j = synth::spec_to_json(s);
    const auto rt = synth::spec_from_json(nlohmann::json::parse(j.dump()));
    CHECK(rt.clusters == 4);
    CHECK(rt.dropout_logit == doctest::Approx(-0.405));
    CHECK(rt.seed == 99);
    CHECK_THROWS(synth::spec_from_json(nlohmann::json::parse(R"({"dispersion": -1})")));
}
