#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sparseprior/countmodel.hpp"
#include "sparseprior/rng.hpp"
#include "sparseprior/special.hpp"
#include "support/testutil.hpp"

using namespace sparseprior;
using grad::Array;
using grad::Tape;

namespace {

// Independent oracle: direct evaluation of the mixture pmf through std::lgamma
// (not the library's Lanczos path).
double log_nb_direct(double x, double mu, double alpha) {
    const double r = 1.0 / alpha;
    return std::lgamma(x + r) - std::lgamma(r) - std::lgamma(x + 1.0) +
           r * std::log(1.0 / (1.0 + alpha * mu)) +
           x * std::log(alpha * mu / (1.0 + alpha * mu));
}

double log_zinb_direct(double x, double mu, double alpha, double l) {
    const double pi = 1.0 / (1.0 + std::exp(-l));
    const double fnb = std::exp(log_nb_direct(x, mu, alpha));
    return x == 0.0 ? std::log(pi + (1.0 - pi) * fnb) : std::log((1.0 - pi) * fnb);
}

double zinb_scalar(double x, double mu, double alpha, double l) {
    counts::ZinbParams p{Array::scalar(mu), Array::scalar(alpha), Array::scalar(l)};
    return counts::zinb_log_likelihood(Array::scalar(x), p).item();
}

}  // namespace

TEST_CASE("log-gamma matches factorial products at integer and half-integer points") {
    // Gamma(n) = (n-1)!,  Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!)
    const double log_pi = std::log(3.14159265358979323846);
    for (int n = 1; n <= 120; ++n) {
        double log_fact = 0.0;  // log (n-1)!
        for (int k = 2; k < n; ++k) log_fact += std::log(static_cast<double>(k));
        CHECK(testutil::rel_err(special::lgamma_pos(n), log_fact) < 1e-12);

        double log_2n_fact = 0.0, log_n_fact = 0.0;
        for (int k = 2; k <= 2 * n; ++k) log_2n_fact += std::log(static_cast<double>(k));
        for (int k = 2; k <= n; ++k) log_n_fact += std::log(static_cast<double>(k));
        const double expected =
            log_2n_fact + 0.5 * log_pi - n * std::log(4.0) - log_n_fact;
        CHECK(testutil::rel_err(special::lgamma_pos(n + 0.5), expected) < 1e-12);
    }
    CHECK(special::lgamma_pos(1.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(special::lgamma_pos(0.5) == doctest::Approx(0.5 * log_pi).epsilon(1e-14));
}

TEST_CASE("digamma is the derivative of log-gamma") {
    CHECK(special::digamma(1.0) == doctest::Approx(-0.5772156649015329).epsilon(1e-12));
    for (double x : {0.3, 0.9, 1.7, 4.2, 11.0, 250.0}) {
        const double h = 1e-6;
        const double fd = (special::lgamma_pos(x + h) - special::lgamma_pos(x - h)) / (2 * h);
        CHECK(testutil::rel_err(special::digamma(x), fd) < 1e-7);
    }
}

TEST_CASE("NB log pmf at x=0, mu=1, alpha=1 is ln(1/2)") {
    const double got = counts::nb_log_pmf(Array::scalar(0), Array::scalar(1), Array::scalar(1)).item();
    CHECK(got == doctest::Approx(std::log(0.5)).epsilon(1e-14));
}

TEST_CASE("NB pmf normalizes over x = 0..500") {
    for (double mu : {0.5, 2.0, 8.0}) {
        for (double alpha : {0.1, 0.5, 2.0}) {
            double total = 0.0;
            for (int x = 0; x <= 500; ++x)
                total += std::exp(
                    counts::nb_log_pmf(Array::scalar(x), Array::scalar(mu), Array::scalar(alpha))
                        .item());
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("NB approaches Poisson as alpha shrinks") {
    const double got =
        counts::nb_log_pmf(Array::scalar(3), Array::scalar(3), Array::scalar(1e-6)).item();
    const double poisson = -3.0 + 3.0 * std::log(3.0) - std::log(6.0);
    CHECK(std::abs(got - poisson) < 1e-4);
}

TEST_CASE("NB rejects nonpositive parameters") {
    CHECK_THROWS(counts::nb_log_pmf(Array::scalar(1), Array::scalar(0.0), Array::scalar(1)));
    CHECK_THROWS(counts::nb_log_pmf(Array::scalar(1), Array::scalar(1), Array::scalar(-0.5)));
    CHECK_THROWS(counts::nb_log_pmf(Array::scalar(1.5), Array::scalar(1), Array::scalar(1)));
}

TEST_CASE("ZINB at x=0, l=0, mu=1, alpha=1 is ln(3/4)") {
    CHECK(zinb_scalar(0, 1, 1, 0) == doctest::Approx(std::log(0.75)).epsilon(1e-14));
}

TEST_CASE("ZINB with pi ~ 0 collapses to plain NB") {
    const double zinb = zinb_scalar(2, 1.3, 0.7, -40.0);
    const double nb =
        counts::nb_log_pmf(Array::scalar(2), Array::scalar(1.3), Array::scalar(0.7)).item();
    CHECK(std::abs(zinb - nb) < 1e-9);
}

TEST_CASE("softplus form equals the direct mixture log pmf on a parameter grid") {
    for (int x = 0; x <= 20; ++x)
        for (double mu : {0.1, 1.0, 10.0})
            for (double alpha : {0.1, 1.0, 5.0})
                for (double l : {-3.0, 0.0, 3.0}) {
                    CAPTURE(x);
                    CAPTURE(mu);
                    CAPTURE(alpha);
                    CAPTURE(l);
                    CHECK(std::abs(zinb_scalar(x, mu, alpha, l) -
                                   log_zinb_direct(x, mu, alpha, l)) < 1e-9);
                }
}

TEST_CASE("log pmf stays finite for huge counts and saturated logits") {
    CHECK(std::isfinite(
        counts::nb_log_pmf(Array::scalar(1e6), Array::scalar(5.0), Array::scalar(0.5)).item()));
    for (double l : {-50.0, 50.0})
        for (double x : {0.0, 3.0})
            CHECK(std::isfinite(zinb_scalar(x, 2.0, 0.5, l)));
}

TEST_CASE("ZINB pmf normalizes") {
    for (double l : {-1.0, 0.5}) {
        double total = 0.0;
        for (int x = 0; x <= 400; ++x) total += std::exp(zinb_scalar(x, 3.0, 0.6, l));
        CHECK(std::abs(total - 1.0) < 1e-6);
    }
}

TEST_CASE("likelihood is monotone in the logit: up at x=0, down at x>0") {
    double prev0 = -1e300, prev2 = 1e300;
    for (double l = -6.0; l <= 6.0; l += 0.5) {
        const double at0 = zinb_scalar(0, 2.0, 0.5, l);
        const double at2 = zinb_scalar(2, 2.0, 0.5, l);
        CHECK(at0 > prev0);
        CHECK(at2 < prev2);
        prev0 = at0;
        prev2 = at2;
    }
}

TEST_CASE("ZINB gradients wrt mu, alpha and logits match finite differences") {
    Rng rng(11);
    const long m = 3, g = 4;
    std::vector<double> xv(m * g);
    for (auto& v : xv) v = static_cast<double>(rng.below(6));  // includes zeros
    const Array x({m, g}, xv);

    std::vector<double> mu0(m * g), al0(g), l0(m * g);
    for (auto& v : mu0) v = rng.uniform(0.3, 4.0);
    for (auto& v : al0) v = rng.uniform(0.2, 2.0);
    for (auto& v : l0) v = rng.uniform(-2.0, 2.0);

    auto eval = [&](const std::vector<double>& packed) {
        Tape tape;
        const Array mu = tape.leaf({m, g}, {packed.begin(), packed.begin() + m * g});
        const Array al = tape.leaf({1, g}, {packed.begin() + m * g, packed.begin() + m * g + g});
        const Array l = tape.leaf({m, g}, {packed.begin() + m * g + g, packed.end()});
        return counts::zinb_log_likelihood(x, {mu, al, l}).item();
    };
    std::vector<double> packed = mu0;
    packed.insert(packed.end(), al0.begin(), al0.end());
    packed.insert(packed.end(), l0.begin(), l0.end());

    Tape tape;
    const Array mu = tape.leaf({m, g}, mu0);
    const Array al = tape.leaf({1, g}, al0);
    const Array l = tape.leaf({m, g}, l0);
    const Array ll = counts::zinb_log_likelihood(x, {mu, al, l});
    const auto grads = tape.gradient(ll, std::vector<Array>{mu, al, l});

    std::vector<double> flat;
    for (const auto& gr : grads) flat.insert(flat.end(), gr.values().begin(), gr.values().end());
    CHECK(testutil::max_rel_err(flat, testutil::fd_gradient(eval, packed)) < 1e-5);
}

TEST_CASE("gaussian KL of identical distributions is zero") {
    counts::GaussPair p{Array({2, 1}, {0.3, -1.0}), Array({2, 1}, {1.2, 0.7}), 0.0, 1.0};
    p.mu_g = 0.3;
    p.sigma_g = 1.2;
    counts::GaussPair same{Array({1, 1}, {0.3}), Array({1, 1}, {1.2}), 0.3, 1.2};
    CHECK(counts::gaussian_kl(same).item() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gaussian KL closed form: unit shift is 1/2") {
    counts::GaussPair p{Array::scalar(1.0), Array::scalar(1.0), 0.0, 1.0};
    CHECK(counts::gaussian_kl(p).item() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("gaussian KL agrees with a Monte-Carlo estimate") {
    const double mu_s = 0.8, sigma_s = 1.4, mu_g = -0.2, sigma_g = 0.9;
    counts::GaussPair p{Array::scalar(mu_s), Array::scalar(sigma_s), mu_g, sigma_g};
    const double closed = counts::gaussian_kl(p).item();

    Rng rng(2718);
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(mu_s, sigma_s);
        const double logq = -std::log(sigma_s) - 0.5 * ((z - mu_s) / sigma_s) * ((z - mu_s) / sigma_s);
        const double logp = -std::log(sigma_g) - 0.5 * ((z - mu_g) / sigma_g) * ((z - mu_g) / sigma_g);
        acc += logq - logp;
    }
    CHECK(std::abs(closed - acc / n) < 1e-2);
}

TEST_CASE("gaussian KL is nonnegative and rejects nonpositive sigma") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        counts::GaussPair p{Array::scalar(rng.uniform(-3, 3)), Array::scalar(rng.uniform(0.05, 3)),
                            rng.uniform(-3, 3), rng.uniform(0.05, 3)};
        CHECK(counts::gaussian_kl(p).item() >= 0.0);
    }
    counts::GaussPair bad{Array::scalar(0.0), Array::scalar(-1.0), 0.0, 1.0};
    CHECK_THROWS(counts::gaussian_kl(bad));
    counts::GaussPair bad2{Array::scalar(0.0), Array::scalar(1.0), 0.0, 0.0};
    CHECK_THROWS(counts::gaussian_kl(bad2));
}

TEST_CASE("KL gradients wrt mu_s and sigma_s match finite differences") {
    Rng rng(12);
    const long m = 4;
    std::vector<double> mu0(m), sg0(m);
    for (auto& v : mu0) v = rng.uniform(-2, 2);
    for (auto& v : sg0) v = rng.uniform(0.3, 2.0);
    auto eval = [&](const std::vector<double>& packed) {
        Tape tape;
        const Array mu = tape.leaf({m, 1}, {packed.begin(), packed.begin() + m});
        const Array sg = tape.leaf({m, 1}, {packed.begin() + m, packed.end()});
        return counts::gaussian_kl({mu, sg, 0.4, 1.3}).item();
    };
    std::vector<double> packed = mu0;
    packed.insert(packed.end(), sg0.begin(), sg0.end());
    Tape tape;
    const Array mu = tape.leaf({m, 1}, mu0);
    const Array sg = tape.leaf({m, 1}, sg0);
    const auto grads =
        tape.gradient(counts::gaussian_kl({mu, sg, 0.4, 1.3}), std::vector<Array>{mu, sg});
    std::vector<double> flat;
    for (const auto& gr : grads) flat.insert(flat.end(), gr.values().begin(), gr.values().end());
    CHECK(testutil::max_rel_err(flat, testutil::fd_gradient(eval, packed)) < 1e-5);
}
