#include "sparseprior/model.hpp"

#include <fstream>
#include <stdexcept>

namespace sparseprior::model {

namespace {

std::vector<nn::Act> hidden_then_linear(std::size_t n_layers) {
    std::vector<nn::Act> acts(n_layers, nn::Act::leaky_relu);
    acts.back() = nn::Act::linear;
    return acts;
}

long trunk_out_dim(const ModelDims& d) {
    return d.enc_hidden.empty() ? d.n_z : d.enc_hidden.front();
}

}  // namespace

Model init_model(const ModelDims& dims, std::uint64_t master_seed) {
    if (dims.n_genes < 1) throw std::invalid_argument("init_model: n_genes must be >= 1");
    if (dims.n_z < 1) throw std::invalid_argument("init_model: n_z must be >= 1");
    Model m;
    m.dims = dims;
    m.seed = master_seed;

    {
        std::vector<long> d{dims.n_genes};
        d.insert(d.end(), dims.enc_hidden.begin(), dims.enc_hidden.end());
        d.push_back(dims.n_z + 2);  // latent plus the two library-size heads
        Rng rng = Rng::stream(master_seed, "init/encoder");
        m.encoder = nn::init_mlp("encoder", d, hidden_then_linear(d.size() - 1), rng);
    }
    if (!dims.enc_hidden.empty()) {
        std::vector<long> d{dims.n_z};
        d.insert(d.end(), dims.enc_hidden.rbegin(), dims.enc_hidden.rend());
        Rng rng = Rng::stream(master_seed, "init/decoder");
        // every trunk layer is hidden; the heads below produce the outputs
        m.decoder_trunk =
            nn::init_mlp("decoder", d, std::vector<nn::Act>(d.size() - 1, nn::Act::leaky_relu), rng);
    }
    {
        Rng rng = Rng::stream(master_seed, "init/heads");
        const long h = trunk_out_dim(dims);
        const double s = std::sqrt(2.0 / static_cast<double>(h));
        const double sqrt3 = std::sqrt(3.0);
        auto init_w = [&](long rows, long cols) {
            std::vector<double> w(static_cast<std::size_t>(rows * cols));
            for (auto& x : w) x = s * rng.uniform(-sqrt3, sqrt3);
            return w;
        };
        m.decoder_heads.add("heads/w_mu", {h, dims.n_genes}, init_w(h, dims.n_genes));
        m.decoder_heads.add("heads/b_mu", {1, dims.n_genes},
                            std::vector<double>(static_cast<std::size_t>(dims.n_genes), 0.0));
        m.decoder_heads.add("heads/w_l", {h, dims.n_genes}, init_w(h, dims.n_genes));
        m.decoder_heads.add("heads/b_l", {1, dims.n_genes},
                            std::vector<double>(static_cast<std::size_t>(dims.n_genes), 0.0));
        std::vector<double> v(static_cast<std::size_t>(dims.n_genes));
        for (auto& x : v) x = rng.normal(0.0, 0.1);
        m.decoder_heads.add("heads/log_inv_disp", {1, dims.n_genes}, std::move(v));
    }
    if (!dims.identity_generator) {
        std::vector<long> d{dims.n_z};
        d.insert(d.end(), dims.gen_hidden.begin(), dims.gen_hidden.end());
        d.push_back(dims.n_z);
        Rng rng = Rng::stream(master_seed, "init/generator");
        m.generator = nn::init_mlp("generator", d, hidden_then_linear(d.size() - 1), rng);
    }
    {
        std::vector<long> d{dims.n_z};
        d.insert(d.end(), dims.critic_hidden.begin(), dims.critic_hidden.end());
        d.push_back(1);
        Rng rng = Rng::stream(master_seed, "init/critic");
        m.critic = nn::init_mlp("critic", d, hidden_then_linear(d.size() - 1), rng);
    }
    return m;
}

std::vector<nn::ParamStore*> encoder_stores(Model& m) { return {&m.encoder.params}; }

std::vector<nn::ParamStore*> decoder_stores(Model& m) {
    std::vector<nn::ParamStore*> s;
    if (!m.decoder_trunk.dims.empty()) s.push_back(&m.decoder_trunk.params);
    s.push_back(&m.decoder_heads);
    return s;
}

std::vector<nn::ParamStore*> generator_stores(Model& m) {
    if (m.generator.dims.empty()) return {};
    return {&m.generator.params};
}

std::vector<nn::ParamStore*> critic_stores(Model& m) { return {&m.critic.params}; }

namespace {

nn::BoundMlp bind_one(const nn::Mlp& mlp, grad::Tape* tape) {
    if (mlp.dims.empty()) return {};
    return tape ? nn::bind(mlp, *tape) : nn::bind_const(mlp);
}

grad::Array lift(const nn::Param& p, grad::Tape* tape) {
    return tape ? tape->leaf(p.shape, p.value) : grad::Array(p.shape, p.value);
}

}  // namespace

BoundModel bind(const Model& m, grad::Tape& tape, BindPlan plan) {
    BoundModel b;
    b.spec = &m;
    b.encoder = bind_one(m.encoder, plan.encoder ? &tape : nullptr);
    b.decoder_trunk = bind_one(m.decoder_trunk, plan.decoder ? &tape : nullptr);
    b.generator = bind_one(m.generator, plan.generator ? &tape : nullptr);
    b.critic = bind_one(m.critic, plan.critic ? &tape : nullptr);
    grad::Tape* head_tape = plan.decoder ? &tape : nullptr;
    b.w_mu = lift(m.decoder_heads.at("heads/w_mu"), head_tape);
    b.b_mu = lift(m.decoder_heads.at("heads/b_mu"), head_tape);
    b.w_l = lift(m.decoder_heads.at("heads/w_l"), head_tape);
    b.b_l = lift(m.decoder_heads.at("heads/b_l"), head_tape);
    b.log_inv_disp = lift(m.decoder_heads.at("heads/log_inv_disp"), head_tape);
    return b;
}

BoundModel bind_const(const Model& m) {
    BoundModel b;
    b.spec = &m;
    b.encoder = bind_one(m.encoder, nullptr);
    b.decoder_trunk = bind_one(m.decoder_trunk, nullptr);
    b.generator = bind_one(m.generator, nullptr);
    b.critic = bind_one(m.critic, nullptr);
    b.w_mu = lift(m.decoder_heads.at("heads/w_mu"), nullptr);
    b.b_mu = lift(m.decoder_heads.at("heads/b_mu"), nullptr);
    b.w_l = lift(m.decoder_heads.at("heads/w_l"), nullptr);
    b.b_l = lift(m.decoder_heads.at("heads/b_l"), nullptr);
    b.log_inv_disp = lift(m.decoder_heads.at("heads/log_inv_disp"), nullptr);
    return b;
}

std::vector<grad::Array> encoder_leaves(const BoundModel& b) { return nn::leaves(b.encoder); }

std::vector<grad::Array> decoder_leaves(const BoundModel& b) {
    std::vector<grad::Array> out;
    if (b.decoder_trunk.spec) out = nn::leaves(b.decoder_trunk);
    out.push_back(b.w_mu);
    out.push_back(b.b_mu);
    out.push_back(b.w_l);
    out.push_back(b.b_l);
    out.push_back(b.log_inv_disp);
    return out;
}

std::vector<grad::Array> generator_leaves(const BoundModel& b) {
    return b.generator.spec ? nn::leaves(b.generator) : std::vector<grad::Array>{};
}

std::vector<grad::Array> critic_leaves(const BoundModel& b) { return nn::leaves(b.critic); }

EncodeOut encode(const BoundModel& b, const grad::Array& x_input) {
    const long n_z = b.spec->dims.n_z;
    const grad::Array out = nn::forward(b.encoder, x_input);
    return EncodeOut{grad::slice_cols(out, 0, n_z), grad::slice_cols(out, n_z, n_z + 1),
                     grad::slice_cols(out, n_z + 1, n_z + 2)};
}

grad::Array sample_s(const EncodeOut& enc, const grad::Array& eps, bool train_mode) {
    if (!train_mode) return enc.mu_s;
    if (!(eps.shape() == enc.mu_s.shape()))
        throw std::invalid_argument("sample_s: eps shape must match mu_s");
    return grad::add(enc.mu_s, grad::mul(grad::exp(enc.log_sigma_s), eps));
}

grad::Array sample_s(const EncodeOut& enc, Rng& rng, bool train_mode) {
    std::vector<double> eps(static_cast<std::size_t>(enc.mu_s.rows()));
    for (auto& e : eps) e = rng.normal();
    return sample_s(enc, grad::Array({enc.mu_s.rows(), 1}, std::move(eps)), train_mode);
}

counts::ZinbParams decode(const BoundModel& b, const grad::Array& z, const grad::Array& s) {
    if (z.cols() != b.spec->dims.n_z)
        throw std::invalid_argument("decode: z has " + std::to_string(z.cols()) +
                                    " columns, expected " + std::to_string(b.spec->dims.n_z));
    if (s.rows() != z.rows() || s.cols() != 1)
        throw std::invalid_argument("decode: s must be one scalar per cell");
    const grad::Array h = b.decoder_trunk.spec ? nn::forward(b.decoder_trunk, z) : z;
    const grad::Array rates = grad::softmax_rows(grad::add(grad::matmul(h, b.w_mu), b.b_mu));
    const grad::Array mu = grad::mul(grad::exp(s), rates);  // rows sum to exp(s)
    const grad::Array logits = grad::add(grad::matmul(h, b.w_l), b.b_l);
    const grad::Array alpha = grad::exp(grad::neg(b.log_inv_disp));
    return counts::ZinbParams{mu, alpha, logits};
}

grad::Array sample_prior_noise(long count, long n_z, Rng& rng) {
    if (count < 1) throw std::invalid_argument("sample_prior: count must be >= 1");
    std::vector<double> v(static_cast<std::size_t>(count * n_z));
    for (auto& x : v) x = rng.normal();
    return grad::Array({count, n_z}, std::move(v));
}

grad::Array generate(const BoundModel& b, const grad::Array& noise) {
    return b.generator.spec ? nn::forward(b.generator, noise) : noise;
}

grad::Array sample_prior(const BoundModel& b, long count, Rng& rng) {
    return generate(b, sample_prior_noise(count, b.spec->dims.n_z, rng));
}

grad::Array critic_score(const BoundModel& b, const grad::Array& z) {
    return nn::forward(b.critic, z);
}

// ---- persistence ---------------------------------------------------------------

nlohmann::ordered_json model_meta(const Model& m) {
    nlohmann::ordered_json j;
    j["kind"] = "sparseprior-model";
    j["seed"] = m.seed;
    j["n_genes"] = m.dims.n_genes;
    j["n_z"] = m.dims.n_z;
    j["enc_hidden"] = m.dims.enc_hidden;
    j["gen_hidden"] = m.dims.gen_hidden;
    j["critic_hidden"] = m.dims.critic_hidden;
    j["identity_generator"] = m.dims.identity_generator;
    j["activations"] = {{"hidden", "leaky_relu"}, {"output", "linear"}};
    return j;
}

std::vector<nn::ArchiveEntry> model_entries(const Model& m) {
    std::vector<nn::ArchiveEntry> out;
    auto append = [&](const nn::ParamStore& s) {
        for (const auto& e : nn::to_entries(s)) out.push_back(e);
    };
    append(m.encoder.params);
    if (!m.decoder_trunk.dims.empty()) append(m.decoder_trunk.params);
    append(m.decoder_heads);
    if (!m.generator.dims.empty()) append(m.generator.params);
    append(m.critic.params);
    return out;
}

Model model_from_archive(const nn::Archive& ar) {
    const auto& meta = ar.meta;
    ModelDims dims;
    dims.n_genes = meta.at("n_genes").get<long>();
    dims.n_z = meta.at("n_z").get<long>();
    dims.enc_hidden = meta.at("enc_hidden").get<std::vector<long>>();
    dims.gen_hidden = meta.at("gen_hidden").get<std::vector<long>>();
    dims.critic_hidden = meta.at("critic_hidden").get<std::vector<long>>();
    dims.identity_generator = meta.at("identity_generator").get<bool>();
    Model m = init_model(dims, meta.at("seed").get<std::uint64_t>());
    nn::load_entries(m.encoder.params, ar);
    if (!m.decoder_trunk.dims.empty()) nn::load_entries(m.decoder_trunk.params, ar);
    nn::load_entries(m.decoder_heads, ar);
    if (!m.generator.dims.empty()) nn::load_entries(m.generator.params, ar);
    nn::load_entries(m.critic.params, ar);
    return m;
}

void write_sidecar(const std::string& path, const Sidecar& sc) {
    nlohmann::ordered_json j;
    j["genes"] = sc.genes;
    j["mu_g"] = sc.mu_g;
    j["sigma_g"] = sc.sigma_g;
    j["n_z"] = sc.n_z;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

Sidecar read_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    const auto j = nlohmann::ordered_json::parse(in);
    Sidecar sc;
    sc.genes = j.at("genes").get<std::vector<std::string>>();
    sc.mu_g = j.at("mu_g").get<double>();
    sc.sigma_g = j.at("sigma_g").get<double>();
    sc.n_z = j.at("n_z").get<long>();
    return sc;
}

}  // namespace sparseprior::model
