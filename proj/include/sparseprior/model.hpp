#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseprior/countmodel.hpp"
#include "sparseprior/grad.hpp"
#include "sparseprior/nn.hpp"
#include "sparseprior/rng.hpp"

// The four-network autoencoder: encoder (latent + library-size heads), ZINB
// decoder (trunk, mean/logit heads, standalone dispersion vector), prior
// generator mapping standard normal noise into latent space, and an
// unconstrained-output critic scoring latents. The generator can be the
// identity map, which reduces the objective to a fixed standard-normal prior.

namespace sparseprior::model {

struct ModelDims {
    long n_genes = 0;
    long n_z = 2;
    std::vector<long> enc_hidden{256, 128};  // decoder trunk mirrors this
    std::vector<long> gen_hidden{128, 128};
    std::vector<long> critic_hidden{128, 128};
    bool identity_generator = false;
};

struct Model {
    ModelDims dims;
    std::uint64_t seed = 0;
    nn::Mlp encoder;              // genes -> enc_hidden -> (n_z + 2), linear output
    nn::Mlp decoder_trunk;        // n_z -> reversed enc_hidden (absent when no hidden layers)
    nn::ParamStore decoder_heads; // w_mu, b_mu, w_l, b_l, log_inv_disp
    nn::Mlp generator;            // n_z -> gen_hidden -> n_z (absent when identity)
    nn::Mlp critic;               // n_z -> critic_hidden -> 1
};

Model init_model(const ModelDims& dims, std::uint64_t master_seed);

// Parameter stores per update group. The groups are pairwise disjoint.
std::vector<nn::ParamStore*> encoder_stores(Model& m);
std::vector<nn::ParamStore*> decoder_stores(Model& m);
std::vector<nn::ParamStore*> generator_stores(Model& m);
std::vector<nn::ParamStore*> critic_stores(Model& m);

struct EncodeOut {
    grad::Array z;            // cells x n_z
    grad::Array mu_s;         // cells x 1
    grad::Array log_sigma_s;  // cells x 1; sigma_s = exp(log_sigma_s) > 0
};

// Which networks are lifted onto the tape as differentiable leaves; the rest
// participate as constants. This keeps update partitions structural: a loss
// can only move parameters that were bound.
struct BindPlan {
    bool encoder = false;
    bool decoder = false;
    bool generator = false;
    bool critic = false;
};

struct BoundModel {
    const Model* spec = nullptr;
    nn::BoundMlp encoder, decoder_trunk, generator, critic;
    grad::Array w_mu, b_mu, w_l, b_l, log_inv_disp;
};

BoundModel bind(const Model& m, grad::Tape& tape, BindPlan plan);
BoundModel bind_const(const Model& m);

std::vector<grad::Array> encoder_leaves(const BoundModel& b);
std::vector<grad::Array> decoder_leaves(const BoundModel& b);
std::vector<grad::Array> generator_leaves(const BoundModel& b);
std::vector<grad::Array> critic_leaves(const BoundModel& b);

// x_input: preprocessed (size-normalized, log1p) expression over the selected
// genes. Deterministic.
EncodeOut encode(const BoundModel& b, const grad::Array& x_input);

// Reparameterized library-size sample: s = mu_s + sigma_s * eps in training
// mode, s = mu_s in eval mode.
grad::Array sample_s(const EncodeOut& enc, const grad::Array& eps, bool train_mode);
grad::Array sample_s(const EncodeOut& enc, Rng& rng, bool train_mode);

// ZINB parameters from a latent batch and per-cell log library size s.
// mu rows sum to exp(s); alpha = exp(-v) is shared across cells.
counts::ZinbParams decode(const BoundModel& b, const grad::Array& z, const grad::Array& s);

// count x n_z standard-normal noise (constant array).
grad::Array sample_prior_noise(long count, long n_z, Rng& rng);

// zhat = G(noise), or noise itself for the identity generator.
grad::Array generate(const BoundModel& b, const grad::Array& noise);

// count x n_z latent prior samples through the generator.
grad::Array sample_prior(const BoundModel& b, long count, Rng& rng);

grad::Array critic_score(const BoundModel& b, const grad::Array& z);

// ---- persistence ----------------------------------------------------------
// Model checkpoints reuse the flat archive format; callers may append extra
// arrays (optimizer state) and metadata. The sidecar JSON records what is
// needed to reproduce embeddings from the checkpoint alone.

nlohmann::ordered_json model_meta(const Model& m);
std::vector<nn::ArchiveEntry> model_entries(const Model& m);
Model model_from_archive(const nn::Archive& ar);

struct Sidecar {
    std::vector<std::string> genes;
    double mu_g = 0.0;
    double sigma_g = 1.0;
    long n_z = 0;
};

void write_sidecar(const std::string& path, const Sidecar& sc);
Sidecar read_sidecar(const std::string& path);

}  // namespace sparseprior::model
