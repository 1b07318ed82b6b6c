#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseprior/model.hpp"
#include "sparseprior/nn.hpp"

// The four losses and the training schedule. Every step minimizes the
// autoencoder loss and updates encoder + decoder; every ratio-th step then
// minimizes the generator and encoder adversarial losses (in that order), and
// all other steps update the critic. Optimizers: Adam(0.9, 0.999) for the
// autoencoder, Adam(0.0, 0.9) for critic, generator, and encoder.
//
// Update partitions are structural: each phase binds only its own parameter
// group onto the tape; everything else enters as constants. Inside the critic
// loss, encoded latents arrive detached from the encoder and prior samples
// detached from the generator.

namespace sparseprior::train {

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RunConfig {
    std::uint64_t seed = 1;
    long n_z = 2;
    long batch_size = 128;
    long steps = 10000;
    double lambda_kl = 1.0;  // weight of the library-size KL term
    double beta_gp = 10.0;   // gradient-penalty weight
    long disc_training_ratio = 5;
    double lr_ae = 1e-3;
    double lr_critic = 1e-4;
    double lr_gen = 1e-4;
    double lr_enc = 1e-4;
    std::vector<long> enc_hidden{256, 128};
    std::vector<long> gen_hidden{128, 128};
    std::vector<long> critic_hidden{128, 128};
    bool identity_generator = false;
    long eval_every = 0;        // 0 disables held-out reporting
    long checkpoint_every = 0;  // 0 means only at the end

    void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const RunConfig& c);

struct LossReport {
    long step = 0;
    double l_ae = 0.0;
    double l_critic = 0.0;
    double l_gen = 0.0;
    double l_enc = 0.0;
    double gp_mean = 0.0;      // beta-weighted penalty term of the critic loss
    double wasserstein = 0.0;  // mean C(z) - mean C(zhat)
    std::optional<double> eval_l_ae;
};

nlohmann::ordered_json report_to_json(const LossReport& r);

// In-memory dataset: raw counts (likelihood target) and normalized log1p
// input over the same genes, plus the train-split library statistics.
struct DataSet {
    long cells = 0;
    long genes = 0;
    std::vector<std::string> cell_ids;
    std::vector<std::string> gene_ids;
    std::vector<double> raw;
    std::vector<double> input;
    double mu_g = 0.0;
    double sigma_g = 1.0;
};

// ---- losses --------------------------------------------------------------------

// Batch mean of (-ZINB log-likelihood + lambda * KL). eps supplies the
// reparameterization noise for the library-size sample.
grad::Array loss_ae(const model::BoundModel& b, const grad::Array& x_raw,
                    const grad::Array& x_input, const grad::Array& eps, double lambda,
                    double mu_g, double sigma_g);

// Per-row random mix of encoded and prior latents; the result is always on
// the tape so the penalty gradient can be taken at the interpolates.
grad::Array interpolate(grad::Tape& tape, const grad::Array& z, const grad::Array& zhat,
                        const grad::Array& mix);
grad::Array interpolate(grad::Tape& tape, const grad::Array& z, const grad::Array& zhat, Rng& rng);

struct CriticLossOut {
    grad::Array total;
    double gp_term = 0.0;      // beta-weighted penalty value
    double wasserstein = 0.0;  // mean C(z) - mean C(zhat)
    double mean_score_real = 0.0;
    double mean_score_prior = 0.0;
};

// mean C(zhat) - mean C(z) + beta * mean((||grad C(z_avg)|| - 1)^2).
// z and zhat must be detached (plain constants).
CriticLossOut loss_critic(grad::Tape& tape, const model::BoundModel& b, const grad::Array& z,
                          const grad::Array& zhat, const grad::Array& mix, double beta);

grad::Array loss_gen(const model::BoundModel& b, const grad::Array& zhat);
grad::Array loss_enc(const model::BoundModel& b, const grad::Array& z);

// ---- trainer --------------------------------------------------------------------

enum class Phase { ae, critic, gen, enc };
const char* to_string(Phase p);

// Called right after each optimizer application.
using Instrument = std::function<void(long step, Phase phase)>;
using ReportSink = std::function<void(const LossReport&)>;

class Trainer {
public:
    Trainer(RunConfig cfg, model::Model mdl);

    static Trainer fresh(const RunConfig& cfg, long n_genes);

    // One Algorithm-style step (1-indexed). Throws DivergenceError on any
    // non-finite loss.
    LossReport train_step(const DataSet& data, const DataSet* eval_set = nullptr,
                          const Instrument& instrument = {});

    void train(const DataSet& data, const DataSet* eval_set, const ReportSink& on_report,
               const Instrument& instrument = {});

    void save_checkpoint(const std::string& path) const;
    static Trainer load_checkpoint(const std::string& path);

    // Extend or re-cadence a resumed run. Every field other than steps,
    // eval_every and checkpoint_every must match the checkpointed config;
    // anything else would silently fork the trajectory.
    void adopt_run_length(const RunConfig& cfg);

    const model::Model& model() const { return model_; }
    model::Model& model() { return model_; }
    long step() const { return step_; }
    const RunConfig& config() const { return cfg_; }

private:
    LossReport run_step(const DataSet& data, const DataSet* eval_set,
                        const Instrument& instrument, long step, long m);

    RunConfig cfg_;
    model::Model model_;
    nn::Adam adam_ae_, adam_critic_, adam_gen_, adam_enc_;
    long step_ = 0;
};

// Embeddings in eval mode (s = mu_s, deterministic), processed in chunks.
std::vector<double> embed(const model::Model& m, const std::vector<double>& x_input,
                          long cells, long genes);

// FNV-1a checksum over the raw bytes of every parameter in the stores.
std::uint64_t checksum(const std::vector<nn::ParamStore*>& stores);

}  // namespace sparseprior::train
