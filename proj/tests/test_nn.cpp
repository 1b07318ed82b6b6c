#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sparseprior/nn.hpp"
#include "support/testutil.hpp"

using namespace sparseprior;
using grad::Array;
using grad::Tape;

TEST_CASE("init: biases are exactly zero, same seed reproduces, empty dims rejected") {
    Rng a(9), b(9);
    const auto m1 = nn::init_mlp("net", {4, 3, 1},
                                 {nn::Act::leaky_relu, nn::Act::linear}, a);
    const auto m2 = nn::init_mlp("net", {4, 3, 1},
                                 {nn::Act::leaky_relu, nn::Act::linear}, b);
    for (double v : m1.params.at("net/layer0/b").value) CHECK(v == 0.0);
    for (double v : m1.params.at("net/layer1/b").value) CHECK(v == 0.0);
    for (std::size_t i = 0; i < m1.params.items().size(); ++i)
        CHECK(m1.params.items()[i].value == m2.params.items()[i].value);
    Rng c(1);
    CHECK_THROWS(nn::init_mlp("bad", {7}, {}, c));
}

TEST_CASE("init: empirical weight variance is 2/fan_in within 5%") {
    Rng rng(123);
    const long fan_in = 4;
    const auto mlp = nn::init_mlp("v", {fan_in, 25000}, {nn::Act::linear}, rng);
    const auto& w = mlp.params.at("v/layer0/W").value;  // 100k draws
    double mean = 0.0;
    for (double x : w) mean += x;
    mean /= static_cast<double>(w.size());
    double var = 0.0;
    for (double x : w) var += (x - mean) * (x - mean);
    var /= static_cast<double>(w.size());
    const double want = 2.0 / static_cast<double>(fan_in);
    CHECK(std::abs(var - want) / want < 0.05);
}

TEST_CASE("forward: identity layer passes input through") {
    Rng rng(4);
    auto mlp = nn::init_mlp("id", {3, 3}, {nn::Act::linear}, rng);
    auto& w = mlp.params.at("id/layer0/W").value;
    std::fill(w.begin(), w.end(), 0.0);
    for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
    const Array x({2, 3}, {1, -2, 3, 0.5, 0, -1});
    CHECK(nn::forward(nn::bind_const(mlp), x).values() == x.values());
}

TEST_CASE("forward: leaky-relu layer scales negatives by 0.2") {
    Rng rng(4);
    auto mlp = nn::init_mlp("lr", {1, 1}, {nn::Act::leaky_relu}, rng);
    mlp.params.at("lr/layer0/W").value = {1.0};
    const Array x({1, 1}, {-1.0});
    CHECK(nn::forward(nn::bind_const(mlp), x).item() == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("forward rejects mismatched input width") {
    Rng rng(4);
    const auto mlp = nn::init_mlp("m", {3, 2}, {nn::Act::linear}, rng);
    CHECK_THROWS(nn::forward(nn::bind_const(mlp), Array({1, 4}, {1, 2, 3, 4})));
}

TEST_CASE("forward is pure: repeated calls are bit-identical") {
    Rng rng(21);
    const auto mlp = nn::init_mlp("p", {5, 4, 2},
                                  {nn::Act::leaky_relu, nn::Act::sigmoid}, rng);
    std::vector<double> xv(10);
    for (auto& v : xv) v = rng.uniform(-3, 3);
    const Array x({2, 5}, xv);
    const auto y1 = nn::forward(nn::bind_const(mlp), x).values();
    const auto y2 = nn::forward(nn::bind_const(mlp), x).values();
    CHECK(y1 == y2);
}

TEST_CASE("no activation saturates to NaN on [-50, 50]") {
    std::vector<double> xs;
    for (double v = -50.0; v <= 50.0; v += 0.5) xs.push_back(v);
    const Array x({1, static_cast<long>(xs.size())}, xs);
    for (auto act : {nn::Act::linear, nn::Act::leaky_relu, nn::Act::sigmoid, nn::Act::softplus}) {
        const auto y = nn::apply_act(act, x);
        for (double v : y.values()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("gradient of sum(forward(x)) wrt parameters matches finite differences") {
    Rng rng(31);
    auto mlp = nn::init_mlp("g", {3, 4, 1}, {nn::Act::leaky_relu, nn::Act::linear}, rng);
    std::vector<double> xv(6);
    for (auto& v : xv) v = rng.uniform(-2, 2);
    const Array x({2, 3}, xv);

    std::vector<double> packed;
    for (const auto& p : mlp.params.items()) packed.insert(packed.end(), p.value.begin(), p.value.end());

    auto eval = [&](const std::vector<double>& theta) {
        auto clone = mlp;
        std::size_t off = 0;
        for (auto& p : clone.params.items()) {
            std::copy(theta.begin() + off, theta.begin() + off + p.value.size(), p.value.begin());
            off += p.value.size();
        }
        Tape tape;
        return grad::sum(nn::forward(nn::bind(clone, tape), x)).item();
    };

    Tape tape;
    const auto bound = nn::bind(mlp, tape);
    const Array f = grad::sum(nn::forward(bound, x));
    const auto grads = tape.gradient(f, nn::leaves(bound));
    std::vector<double> flat;
    for (const auto& g : grads) flat.insert(flat.end(), g.values().begin(), g.values().end());
    CHECK(testutil::max_rel_err(flat, testutil::fd_gradient(eval, packed)) < 1e-5);
}

TEST_CASE("adam: first-step magnitude is about lr, zero gradient leaves parameters alone") {
    nn::ParamStore store;
    store.add("p", {1, 2}, {1.0, -2.0});
    nn::Adam opt({.lr = 1e-3, .beta1 = 0.9, .beta2 = 0.999}, {&store});
    opt.step({Array({1, 2}, {1.0, 1.0})});
    CHECK(store.at("p").value[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(store.at("p").value[1] == doctest::Approx(-2.0 - 1e-3).epsilon(1e-6));

    nn::ParamStore frozen;
    frozen.add("p", {1, 2}, {0.5, 0.25});
    nn::Adam opt2({.lr = 0.1, .beta1 = 0.0, .beta2 = 0.9}, {&frozen});
    opt2.step({Array({1, 2}, {0.0, 0.0})});
    CHECK(frozen.at("p").value == std::vector<double>{0.5, 0.25});
}

TEST_CASE("adam: three constant-gradient steps match the reference recurrence") {
    nn::ParamStore store;
    store.add("p", {1, 1}, {0.7});
    nn::Adam opt({.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .epsilon = 1e-8}, {&store});

    double p = 0.7, m = 0.0, u = 0.0;
    for (int t = 1; t <= 3; ++t) {
        opt.step({Array::scalar(1.0)});
        m = 0.9 * m + 0.1 * 1.0;
        u = 0.999 * u + 0.001 * 1.0;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double uhat = u / (1.0 - std::pow(0.999, t));
        p -= 0.1 * mhat / (std::sqrt(uhat) + 1e-8);
        CHECK(std::abs(store.at("p").value[0] - p) < 1e-12);
    }
}

TEST_CASE("adam is invariant to registry iteration order") {
    nn::ParamStore fwd, rev;
    fwd.add("a", {1, 1}, {1.0});
    fwd.add("b", {1, 1}, {2.0});
    rev.add("b", {1, 1}, {2.0});
    rev.add("a", {1, 1}, {1.0});
    nn::Adam o1({.lr = 0.05, .beta1 = 0.5, .beta2 = 0.8}, {&fwd});
    nn::Adam o2({.lr = 0.05, .beta1 = 0.5, .beta2 = 0.8}, {&rev});
    for (int t = 0; t < 5; ++t) {
        o1.step({Array::scalar(0.3), Array::scalar(-0.7)});
        o2.step({Array::scalar(-0.7), Array::scalar(0.3)});
    }
    CHECK(fwd.at("a").value == rev.at("a").value);
    CHECK(fwd.at("b").value == rev.at("b").value);
}

TEST_CASE("adam rejects a missing gradient") {
    nn::ParamStore store;
    store.add("a", {1, 1}, {1.0});
    store.add("b", {1, 1}, {2.0});
    nn::Adam opt({}, {&store});
    CHECK_THROWS(opt.step({Array::scalar(1.0)}));
    CHECK_THROWS(opt.step({Array::scalar(1.0), Array()}));
}

TEST_CASE("parameter archive round-trips params and metadata") {
    testutil::TempDir tmp("archive");
    Rng rng(77);
    auto mlp = nn::init_mlp("net", {6, 5, 3}, {nn::Act::leaky_relu, nn::Act::linear}, rng);

    nlohmann::ordered_json meta;
    meta["dims"] = {6, 5, 3};
    meta["activations"] = {"leaky_relu", "linear"};
    meta["seed"] = 77;
    const auto path = tmp.path("ckpt.bin");
    nn::write_archive(path, meta, nn::to_entries(mlp.params));

    const auto ar = nn::read_archive(path);
    CHECK(ar.meta.at("seed").get<int>() == 77);
    CHECK(ar.meta.at("dims") == nlohmann::ordered_json({6, 5, 3}));

    auto clone = mlp;
    for (auto& p : clone.params.items()) std::fill(p.value.begin(), p.value.end(), 0.0);
    nn::load_entries(clone.params, ar);
    for (std::size_t i = 0; i < mlp.params.items().size(); ++i)
        CHECK(clone.params.items()[i].value == mlp.params.items()[i].value);

    // same content written twice is byte-identical
    const auto path2 = tmp.path("ckpt2.bin");
    nn::write_archive(path2, meta, nn::to_entries(mlp.params));
    CHECK(testutil::read_file(path) == testutil::read_file(path2));
}
