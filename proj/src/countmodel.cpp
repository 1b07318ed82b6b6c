#include "sparseprior/countmodel.hpp"

#include <cmath>
#include <stdexcept>

#include "sparseprior/special.hpp"

namespace sparseprior::counts {

namespace {

void check_counts(const grad::Array& x) {
    for (double v : x.values())
        if (!(v >= 0.0) || std::floor(v) != v)
            throw std::invalid_argument("counts must be nonnegative integers");
}

void check_positive(const grad::Array& a, const char* what) {
    for (double v : a.values())
        if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
}

// lgamma(x + 1) for constant integer counts; no gradient flows through x.
grad::Array lgamma_xp1_const(const grad::Array& x) {
    std::vector<double> v(x.values().size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = special::lgamma_pos(x.values()[i] + 1.0);
    return grad::Array(x.shape(), std::move(v));
}

}  // namespace

grad::Array nb_log_pmf(const grad::Array& x, const grad::Array& mu, const grad::Array& alpha) {
    check_counts(x);
    check_positive(mu, "mu");
    check_positive(alpha, "alpha");
    using namespace grad;
    const Array r = div(Array::scalar(1.0), alpha);  // inverse dispersion
    // lgamma(x+r) - lgamma(r) - lgamma(x+1) - r*log1p(mu/r) + x*(log mu - log(r+mu))
    const Array a = sub(lgamma(add(x, r)), lgamma(r));
    const Array b = lgamma_xp1_const(x);
    const Array log_odds0 = neg(mul(r, log1p(div(mu, r))));
    const Array tail = mul(x, sub(log(mu), log(add(r, mu))));
    return add(sub(a, b), add(broadcast_to(log_odds0, mu.shape()), tail));
}

grad::Array zinb_log_likelihood(const grad::Array& x, const ZinbParams& params) {
    check_counts(x);
    check_positive(params.mu, "mu");
    check_positive(params.alpha, "alpha");
    if (!(params.logits.shape() == params.mu.shape()) || !(x.shape() == params.mu.shape()))
        throw std::invalid_argument("zinb_log_likelihood: x, mu and logits shapes must agree");
    using namespace grad;
    const Array& l = params.logits;
    const Array r = div(Array::scalar(1.0), params.alpha);
    // t = (1/alpha) * log(1/(1 + alpha*mu)) = -r * log1p(mu/r)
    const Array t = broadcast_to(neg(mul(r, log1p(div(params.mu, r)))), params.mu.shape());

    const Array nsp_neg_l = neg(softplus(neg(l)));  // log pi
    const Array zero_branch = add(nsp_neg_l, softplus(add(neg(l), t)));
    const Array pos_branch = add(sub(nsp_neg_l, l), nb_log_pmf(x, params.mu, params.alpha));

    std::vector<double> m0(x.values().size());
    for (std::size_t i = 0; i < m0.size(); ++i) m0[i] = x.values()[i] == 0.0 ? 1.0 : 0.0;
    const Array mask0(x.shape(), m0);
    const Array mask_pos = add_scalar(neg(mask0), 1.0);
    return sum(add(mul(mask0, zero_branch), mul(mask_pos, pos_branch)));
}

grad::Array gaussian_kl(const GaussPair& pair) {
    if (!(pair.sigma_g > 0.0)) throw std::invalid_argument("sigma_g must be positive");
    check_positive(pair.sigma_s, "sigma_s");
    if (!(pair.mu_s.shape() == pair.sigma_s.shape()))
        throw std::invalid_argument("gaussian_kl: mu_s and sigma_s shapes must agree");
    using namespace grad;
    // log(sigma_g/sigma_s) + (sigma_s^2 + (mu_s - mu_g)^2) / (2 sigma_g^2) - 1/2
    const double inv_two_var = 1.0 / (2.0 * pair.sigma_g * pair.sigma_g);
    const Array quad =
        scale(add(square(pair.sigma_s), square(add_scalar(pair.mu_s, -pair.mu_g))), inv_two_var);
    const Array per_cell =
        add_scalar(add(neg(log(pair.sigma_s)), quad), std::log(pair.sigma_g) - 0.5);
    return sum(per_cell);
}

}  // namespace sparseprior::counts
