#include "sparseprior/trainer.hpp"

#include <cmath>

#include "sparseprior/countmodel.hpp"

namespace sparseprior::train {

void RunConfig::validate() const {
    if (!(lambda_kl >= 0.0)) throw ValidationError("config: lambda must be >= 0");
    if (!(beta_gp >= 0.0)) throw ValidationError("config: beta must be >= 0");
    if (disc_training_ratio < 1) throw ValidationError("config: disc_training_ratio must be >= 1");
    for (auto [lr, name] : {std::pair{lr_ae, "lr_ae"},
                            {lr_critic, "lr_critic"},
                            {lr_gen, "lr_gen"},
                            {lr_enc, "lr_enc"}})
        if (!(lr > 0.0)) throw ValidationError(std::string("config: ") + name + " must be > 0");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (steps < 0) throw ValidationError("config: steps must be >= 0");
    if (n_z < 1) throw ValidationError("config: n_z must be >= 1");
    if (eval_every < 0 || checkpoint_every < 0)
        throw ValidationError("config: cadences must be >= 0");
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.n_z = j.value("n_z", c.n_z);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.lambda_kl = j.value("lambda", c.lambda_kl);
    c.beta_gp = j.value("beta", c.beta_gp);
    c.disc_training_ratio = j.value("disc_training_ratio", c.disc_training_ratio);
    c.lr_ae = j.value("lr_ae", c.lr_ae);
    c.lr_critic = j.value("lr_critic", c.lr_critic);
    c.lr_gen = j.value("lr_gen", c.lr_gen);
    c.lr_enc = j.value("lr_enc", c.lr_enc);
    c.enc_hidden = j.value("enc_hidden", c.enc_hidden);
    c.gen_hidden = j.value("gen_hidden", c.gen_hidden);
    c.critic_hidden = j.value("critic_hidden", c.critic_hidden);
    if (j.contains("generator")) {
        const auto g = j.at("generator").get<std::string>();
        if (g == "identity")
            c.identity_generator = true;
        else if (g == "mlp")
            c.identity_generator = false;
        else
            throw ValidationError("config: generator must be 'mlp' or 'identity'");
    }
    c.eval_every = j.value("eval_every", c.eval_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.validate();
    return c;
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["n_z"] = c.n_z;
    j["batch_size"] = c.batch_size;
    j["steps"] = c.steps;
    j["lambda"] = c.lambda_kl;
    j["beta"] = c.beta_gp;
    j["disc_training_ratio"] = c.disc_training_ratio;
    j["lr_ae"] = c.lr_ae;
    j["lr_critic"] = c.lr_critic;
    j["lr_gen"] = c.lr_gen;
    j["lr_enc"] = c.lr_enc;
    j["enc_hidden"] = c.enc_hidden;
    j["gen_hidden"] = c.gen_hidden;
    j["critic_hidden"] = c.critic_hidden;
    j["generator"] = c.identity_generator ? "identity" : "mlp";
    j["eval_every"] = c.eval_every;
    j["checkpoint_every"] = c.checkpoint_every;
    return j;
}

nlohmann::ordered_json report_to_json(const LossReport& r) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["l_ae"] = r.l_ae;
    j["l_critic"] = r.l_critic;
    j["l_gen"] = r.l_gen;
    j["l_enc"] = r.l_enc;
    j["gp_mean"] = r.gp_mean;
    j["wasserstein"] = r.wasserstein;
    if (r.eval_l_ae) j["eval_l_ae"] = *r.eval_l_ae;
    return j;
}

const char* to_string(Phase p) {
    switch (p) {
        case Phase::ae: return "ae";
        case Phase::critic: return "critic";
        case Phase::gen: return "gen";
        case Phase::enc: return "enc";
    }
    return "?";
}

// ---- losses -------------------------------------------------------------------

grad::Array loss_ae(const model::BoundModel& b, const grad::Array& x_raw,
                    const grad::Array& x_input, const grad::Array& eps, double lambda,
                    double mu_g, double sigma_g) {
    const model::EncodeOut enc = model::encode(b, x_input);
    const grad::Array s = model::sample_s(enc, eps, true);
    const counts::ZinbParams params = model::decode(b, enc.z, s);
    const grad::Array nll = grad::neg(counts::zinb_log_likelihood(x_raw, params));
    const grad::Array kl =
        counts::gaussian_kl({enc.mu_s, grad::exp(enc.log_sigma_s), mu_g, sigma_g});
    const double inv_batch = 1.0 / static_cast<double>(x_raw.rows());
    return grad::scale(grad::add(nll, grad::scale(kl, lambda)), inv_batch);
}

grad::Array interpolate(grad::Tape& tape, const grad::Array& z, const grad::Array& zhat,
                        const grad::Array& mix) {
    if (!(z.shape() == zhat.shape()))
        throw std::invalid_argument("interpolate: latent batches differ in shape");
    if (mix.rows() != z.rows() || mix.cols() != 1)
        throw std::invalid_argument("interpolate: need one mix coefficient per row");
    const grad::Array one_minus = grad::add_scalar(grad::neg(mix), 1.0);
    const grad::Array out = grad::add(grad::mul(mix, z), grad::mul(one_minus, zhat));
    return out.on_tape() ? out : tape.leaf(out);
}

grad::Array interpolate(grad::Tape& tape, const grad::Array& z, const grad::Array& zhat,
                        Rng& rng) {
    std::vector<double> mix(static_cast<std::size_t>(z.rows()));
    for (auto& v : mix) v = rng.uniform();
    return interpolate(tape, z, zhat, grad::Array({z.rows(), 1}, std::move(mix)));
}

CriticLossOut loss_critic(grad::Tape& tape, const model::BoundModel& b, const grad::Array& z,
                          const grad::Array& zhat, const grad::Array& mix, double beta) {
    if (z.on_tape() || zhat.on_tape())
        throw std::invalid_argument("loss_critic: latent batches must be detached");
    const grad::Array z_avg = interpolate(tape, z, zhat, mix);

    const grad::Array score_real = model::critic_score(b, z);
    const grad::Array score_prior = model::critic_score(b, zhat);
    const grad::Array score_avg = model::critic_score(b, z_avg);

    // per-row gradient norms at the interpolates, differentiable in the
    // critic parameters
    const grad::Array g = tape.gradient(grad::sum(score_avg), std::vector<grad::Array>{z_avg})[0];
    const grad::Array norms = grad::l2norm_rows(g);
    const grad::Array penalty =
        grad::scale(grad::mean(grad::square(grad::add_scalar(norms, -1.0))), beta);

    CriticLossOut out;
    out.total = grad::add(grad::sub(grad::mean(score_prior), grad::mean(score_real)), penalty);
    out.gp_term = penalty.item();
    out.mean_score_real = grad::mean(score_real).item();
    out.mean_score_prior = grad::mean(score_prior).item();
    out.wasserstein = out.mean_score_real - out.mean_score_prior;
    return out;
}

grad::Array loss_gen(const model::BoundModel& b, const grad::Array& zhat) {
    return grad::neg(grad::mean(model::critic_score(b, zhat)));
}

grad::Array loss_enc(const model::BoundModel& b, const grad::Array& z) {
    return grad::mean(model::critic_score(b, z));
}

// ---- trainer -------------------------------------------------------------------

namespace {

nn::AdamConfig ae_adam(double lr) { return {.lr = lr, .beta1 = 0.9, .beta2 = 0.999}; }
nn::AdamConfig adv_adam(double lr) { return {.lr = lr, .beta1 = 0.0, .beta2 = 0.9}; }

std::vector<nn::ParamStore*> concat(std::vector<nn::ParamStore*> a,
                                    const std::vector<nn::ParamStore*>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

grad::Array gather_rows(const std::vector<double>& flat, long cols,
                        const std::vector<long>& rows) {
    std::vector<double> out(rows.size() * static_cast<std::size_t>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(flat.begin() + rows[i] * cols, flat.begin() + (rows[i] + 1) * cols,
                  out.begin() + static_cast<long>(i) * cols);
    return grad::Array({static_cast<long>(rows.size()), cols}, std::move(out));
}

}  // namespace

Trainer::Trainer(RunConfig cfg, model::Model mdl)
    : cfg_(std::move(cfg)),
      model_(std::move(mdl)),
      adam_ae_(ae_adam(cfg_.lr_ae),
               concat(model::encoder_stores(model_), model::decoder_stores(model_))),
      adam_critic_(adv_adam(cfg_.lr_critic), model::critic_stores(model_)),
      adam_gen_(adv_adam(cfg_.lr_gen), model::generator_stores(model_)),
      adam_enc_(adv_adam(cfg_.lr_enc), model::encoder_stores(model_)) {
    cfg_.validate();
}

Trainer Trainer::fresh(const RunConfig& cfg, long n_genes) {
    cfg.validate();
    model::ModelDims dims;
    dims.n_genes = n_genes;
    dims.n_z = cfg.n_z;
    dims.enc_hidden = cfg.enc_hidden;
    dims.gen_hidden = cfg.gen_hidden;
    dims.critic_hidden = cfg.critic_hidden;
    dims.identity_generator = cfg.identity_generator;
    return Trainer(cfg, model::init_model(dims, cfg.seed));
}

LossReport Trainer::train_step(const DataSet& data, const DataSet* eval_set,
                               const Instrument& instrument) {
    const long m = cfg_.batch_size;
    if (data.cells < 1) throw ValidationError("train: empty dataset");
    if (data.genes != model_.dims.n_genes)
        throw ValidationError("train: dataset gene count does not match the model");
    const long step = ++step_;
    try {
        return run_step(data, eval_set, instrument, step, m);
    } catch (const std::domain_error& e) {
        // a domain violation mid-trajectory (mu or alpha driven to the edge)
        // is divergence, not bad input
        throw DivergenceError("numeric blow-up at step " + std::to_string(step) + ": " +
                              e.what());
    } catch (const std::invalid_argument& e) {
        throw DivergenceError("numeric blow-up at step " + std::to_string(step) + ": " +
                              e.what());
    }
}

LossReport Trainer::run_step(const DataSet& data, const DataSet* eval_set,
                             const Instrument& instrument, long step, long m) {

    // Fixed number of draws per step, so a resumed run replays identically.
    Rng batch_rng = Rng::stream(cfg_.seed, "train/batch", static_cast<std::uint64_t>(step));
    Rng eps_rng = Rng::stream(cfg_.seed, "train/libsize", static_cast<std::uint64_t>(step));
    Rng prior_rng = Rng::stream(cfg_.seed, "train/prior", static_cast<std::uint64_t>(step));
    Rng mix_rng = Rng::stream(cfg_.seed, "train/interp", static_cast<std::uint64_t>(step));

    std::vector<long> rows(static_cast<std::size_t>(m));
    for (auto& r : rows)
        r = static_cast<long>(batch_rng.below(static_cast<std::uint64_t>(data.cells)));
    std::vector<double> epsv(static_cast<std::size_t>(m));
    for (auto& e : epsv) e = eps_rng.normal();
    std::vector<double> noisev(static_cast<std::size_t>(m * model_.dims.n_z));
    for (auto& x : noisev) x = prior_rng.normal();
    std::vector<double> mixv(static_cast<std::size_t>(m));
    for (auto& x : mixv) x = mix_rng.uniform();

    const grad::Array x_raw = gather_rows(data.raw, data.genes, rows);
    const grad::Array x_in = gather_rows(data.input, data.genes, rows);
    const grad::Array eps({m, 1}, epsv);
    const grad::Array noise({m, model_.dims.n_z}, noisev);
    const grad::Array mix({m, 1}, mixv);

    LossReport rep;
    rep.step = step;

    // -- autoencoder phase: always ------------------------------------------------
    {
        grad::Tape tape;
        const auto b = model::bind(model_, tape, {.encoder = true, .decoder = true});
        const grad::Array l =
            loss_ae(b, x_raw, x_in, eps, cfg_.lambda_kl, data.mu_g, data.sigma_g);
        rep.l_ae = l.item();
        auto wrt = model::encoder_leaves(b);
        const auto dec = model::decoder_leaves(b);
        wrt.insert(wrt.end(), dec.begin(), dec.end());
        adam_ae_.step(tape.gradient(l, wrt));
        if (instrument) instrument(step, Phase::ae);
    }

    // latents for the adversarial phases, detached by construction
    const auto bc = model::bind_const(model_);
    const grad::Array z_det = model::encode(bc, x_in).z;
    const grad::Array zhat_det = model::generate(bc, noise);

    const bool adversarial_step = step % cfg_.disc_training_ratio == 0;
    if (adversarial_step) {
        {
            grad::Tape tape;
            const auto b = model::bind(model_, tape, {.generator = true});
            const grad::Array zhat = model::generate(b, noise);
            const grad::Array l = loss_gen(b, zhat);
            rep.l_gen = l.item();
            adam_gen_.step(tape.gradient(l, model::generator_leaves(b)));
            if (instrument) instrument(step, Phase::gen);
        }
        {
            grad::Tape tape;
            const auto b = model::bind(model_, tape, {.encoder = true});
            const grad::Array z = model::encode(b, x_in).z;
            const grad::Array l = loss_enc(b, z);
            rep.l_enc = l.item();
            adam_enc_.step(tape.gradient(l, model::encoder_leaves(b)));
            if (instrument) instrument(step, Phase::enc);
        }
        // critic untouched this step; report its loss at the step's draws
        grad::Tape tape;
        const auto out = loss_critic(tape, bc, z_det, zhat_det, mix, cfg_.beta_gp);
        rep.l_critic = out.total.item();
        rep.gp_mean = out.gp_term;
        rep.wasserstein = out.wasserstein;
    } else {
        grad::Tape tape;
        const auto b = model::bind(model_, tape, {.critic = true});
        const auto out = loss_critic(tape, b, z_det, zhat_det, mix, cfg_.beta_gp);
        rep.l_critic = out.total.item();
        rep.gp_mean = out.gp_term;
        rep.wasserstein = out.wasserstein;
        rep.l_gen = -out.mean_score_prior;
        rep.l_enc = out.mean_score_real;
        adam_critic_.step(tape.gradient(out.total, model::critic_leaves(b)));
        if (instrument) instrument(step, Phase::critic);
    }

    if (eval_set && cfg_.eval_every > 0 && step % cfg_.eval_every == 0) {
        const long take = std::min<long>(512, eval_set->cells);
        std::vector<long> idx(static_cast<std::size_t>(take));
        for (long i = 0; i < take; ++i) idx[static_cast<std::size_t>(i)] = i;
        const grad::Array xr = gather_rows(eval_set->raw, eval_set->genes, idx);
        const grad::Array xi = gather_rows(eval_set->input, eval_set->genes, idx);
        const auto b = model::bind_const(model_);
        const model::EncodeOut enc = model::encode(b, xi);
        const counts::ZinbParams params = model::decode(b, enc.z, enc.mu_s);  // eval: s = mu_s
        const grad::Array nll = grad::neg(counts::zinb_log_likelihood(xr, params));
        const grad::Array kl =
            counts::gaussian_kl({enc.mu_s, grad::exp(enc.log_sigma_s), data.mu_g, data.sigma_g});
        rep.eval_l_ae =
            (nll.item() + cfg_.lambda_kl * kl.item()) / static_cast<double>(take);
    }

    for (double v : {rep.l_ae, rep.l_critic, rep.l_gen, rep.l_enc, rep.gp_mean, rep.wasserstein})
        if (!std::isfinite(v))
            throw DivergenceError("non-finite loss at step " + std::to_string(step) + ": " +
                                  report_to_json(rep).dump());
    return rep;
}

void Trainer::train(const DataSet& data, const DataSet* eval_set, const ReportSink& on_report,
                    const Instrument& instrument) {
    while (step_ < cfg_.steps) {
        const LossReport rep = train_step(data, eval_set, instrument);
        if (on_report) on_report(rep);
    }
}

void Trainer::save_checkpoint(const std::string& path) const {
    nlohmann::ordered_json meta = model::model_meta(model_);
    meta["step"] = step_;
    meta["config"] = config_to_json(cfg_);
    meta["adam_t"] = {{"ae", adam_ae_.step_count()},
                      {"critic", adam_critic_.step_count()},
                      {"gen", adam_gen_.step_count()},
                      {"enc", adam_enc_.step_count()}};
    auto arrays = model::model_entries(model_);
    auto add_moments = [&](const char* tag, const nn::Adam& adam) {
        for (const auto& p : adam.moments_m())
            arrays.push_back({std::string("opt/") + tag + "/m/" + p.name, p.shape, p.value});
        for (const auto& p : adam.moments_u())
            arrays.push_back({std::string("opt/") + tag + "/u/" + p.name, p.shape, p.value});
    };
    add_moments("ae", adam_ae_);
    add_moments("critic", adam_critic_);
    add_moments("gen", adam_gen_);
    add_moments("enc", adam_enc_);
    nn::write_archive(path, meta, arrays);
}

Trainer Trainer::load_checkpoint(const std::string& path) {
    const nn::Archive ar = nn::read_archive(path);
    const RunConfig cfg = config_from_json(ar.meta.at("config"));
    Trainer t(cfg, model::model_from_archive(ar));
    t.step_ = ar.meta.at("step").get<long>();

    auto restore = [&](const char* tag, nn::Adam& adam, long tcount) {
        std::vector<std::vector<double>> m, u;
        for (const auto& p : adam.moments_m())
            m.push_back(ar.at(std::string("opt/") + tag + "/m/" + p.name).data);
        for (const auto& p : adam.moments_u())
            u.push_back(ar.at(std::string("opt/") + tag + "/u/" + p.name).data);
        adam.restore(tcount, m, u);
    };
    const auto& t_counts = ar.meta.at("adam_t");
    restore("ae", t.adam_ae_, t_counts.at("ae").get<long>());
    restore("critic", t.adam_critic_, t_counts.at("critic").get<long>());
    restore("gen", t.adam_gen_, t_counts.at("gen").get<long>());
    restore("enc", t.adam_enc_, t_counts.at("enc").get<long>());
    return t;
}

void Trainer::adopt_run_length(const RunConfig& cfg) {
    cfg.validate();
    RunConfig probe = cfg;
    probe.steps = cfg_.steps;
    probe.eval_every = cfg_.eval_every;
    probe.checkpoint_every = cfg_.checkpoint_every;
    if (config_to_json(probe).dump() != config_to_json(cfg_).dump())
        throw ValidationError(
            "resume: config differs from the checkpoint in more than the run length");
    cfg_.steps = cfg.steps;
    cfg_.eval_every = cfg.eval_every;
    cfg_.checkpoint_every = cfg.checkpoint_every;
}

std::vector<double> embed(const model::Model& m, const std::vector<double>& x_input,
                          long cells, long genes) {
    if (genes != m.dims.n_genes)
        throw ValidationError("embed: input gene count does not match the model");
    const auto b = model::bind_const(m);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(cells) * m.dims.n_z);
    constexpr long chunk = 512;
    for (long lo = 0; lo < cells; lo += chunk) {
        const long hi = std::min(cells, lo + chunk);
        std::vector<double> slice(x_input.begin() + lo * genes, x_input.begin() + hi * genes);
        const grad::Array x({hi - lo, genes}, std::move(slice));
        const auto z = model::encode(b, x).z.values();
        out.insert(out.end(), z.begin(), z.end());
    }
    return out;
}

std::uint64_t checksum(const std::vector<nn::ParamStore*>& stores) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto* s : stores)
        for (const auto& p : s->items()) {
            h ^= fnv1a64(p.name);
            h *= 0x100000001b3ull;
            h ^= fnv1a64(p.value.data(), p.value.size() * sizeof(double));
            h *= 0x100000001b3ull;
        }
    return h;
}

}  // namespace sparseprior::train
