#pragma once

#include "sparseprior/grad.hpp"

// Zero-inflated negative binomial log-likelihood and the diagonal-Gaussian KL
// used for the library-size channel. All paths stay in logit space for the
// zero-inflation weight and use -log1p(mu/r) for the NB log-odds term, which
// is stable for small alpha*mu.

namespace sparseprior::counts {

struct ZinbParams {
    grad::Array mu;      // cells x genes, strictly positive means
    grad::Array alpha;   // dispersion, broadcastable to mu (typically 1 x genes)
    grad::Array logits;  // excess-zero logits l, pi = sigmoid(l)
};

// Elementwise log f_NB(x; mu, alpha); x holds nonnegative integer counts and
// is treated as a constant.
grad::Array nb_log_pmf(const grad::Array& x, const grad::Array& mu, const grad::Array& alpha);

// Total ZINB log-likelihood (summed over all entries), the softplus form of
// the mixture's log pmf. Finite for |logits| up to ~50 and counts up to 1e6.
grad::Array zinb_log_likelihood(const grad::Array& x, const ZinbParams& params);

struct GaussPair {
    grad::Array mu_s;     // cells x 1
    grad::Array sigma_s;  // cells x 1, > 0
    double mu_g = 0.0;
    double sigma_g = 1.0;  // > 0
};

// Sum over cells of KL(N(mu_s, sigma_s) || N(mu_g, sigma_g)), closed form.
grad::Array gaussian_kl(const GaussPair& pair);

}  // namespace sparseprior::counts
