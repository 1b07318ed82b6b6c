#include "sparseprior/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sparseprior::nn {

Act act_from_string(const std::string& s) {
    if (s == "linear") return Act::linear;
    if (s == "leaky_relu") return Act::leaky_relu;
    if (s == "sigmoid") return Act::sigmoid;
    if (s == "softplus") return Act::softplus;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Act a) {
    switch (a) {
        case Act::linear: return "linear";
        case Act::leaky_relu: return "leaky_relu";
        case Act::sigmoid: return "sigmoid";
        case Act::softplus: return "softplus";
    }
    return "linear";
}

void ParamStore::add(std::string name, grad::Shape shape, std::vector<double> value) {
    if (static_cast<long>(value.size()) != shape.size())
        throw std::invalid_argument("param " + name + ": value length does not match shape");
    if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    items_.push_back(Param{std::move(name), shape, std::move(value)});
}

Param& ParamStore::at(const std::string& name) {
    for (auto& p : items_)
        if (p.name == name) return p;
    throw std::invalid_argument("no such parameter: " + name);
}

const Param& ParamStore::at(const std::string& name) const {
    for (const auto& p : items_)
        if (p.name == name) return p;
    throw std::invalid_argument("no such parameter: " + name);
}

bool ParamStore::contains(const std::string& name) const {
    for (const auto& p : items_)
        if (p.name == name) return true;
    return false;
}

Mlp init_mlp(const std::string& name, const std::vector<long>& dims, const std::vector<Act>& acts,
             Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("init_mlp: need at least [in, out] dims");
    if (acts.size() != dims.size() - 1)
        throw std::invalid_argument("init_mlp: need one activation per layer");
    Mlp mlp;
    mlp.name = name;
    mlp.dims = dims;
    mlp.acts = acts;
    const double sqrt3 = std::sqrt(3.0);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const long fan_in = dims[l], fan_out = dims[l + 1];
        const double s = std::sqrt(2.0 / static_cast<double>(fan_in));
        std::vector<double> w(static_cast<std::size_t>(fan_in * fan_out));
        for (auto& x : w) x = s * rng.uniform(-sqrt3, sqrt3);
        mlp.params.add(name + "/layer" + std::to_string(l) + "/W", {fan_in, fan_out},
                       std::move(w));
        mlp.params.add(name + "/layer" + std::to_string(l) + "/b", {1, fan_out},
                       std::vector<double>(static_cast<std::size_t>(fan_out), 0.0));
    }
    return mlp;
}

BoundMlp bind(const Mlp& mlp, grad::Tape& tape) {
    BoundMlp b;
    b.spec = &mlp;
    for (std::size_t l = 0; l + 1 < mlp.dims.size(); ++l) {
        const auto& w = mlp.params.at(mlp.name + "/layer" + std::to_string(l) + "/W");
        const auto& bi = mlp.params.at(mlp.name + "/layer" + std::to_string(l) + "/b");
        b.weights.push_back(tape.leaf(w.shape, w.value));
        b.biases.push_back(tape.leaf(bi.shape, bi.value));
    }
    return b;
}

BoundMlp bind_const(const Mlp& mlp) {
    BoundMlp b;
    b.spec = &mlp;
    for (std::size_t l = 0; l + 1 < mlp.dims.size(); ++l) {
        const auto& w = mlp.params.at(mlp.name + "/layer" + std::to_string(l) + "/W");
        const auto& bi = mlp.params.at(mlp.name + "/layer" + std::to_string(l) + "/b");
        b.weights.emplace_back(w.shape, w.value);
        b.biases.emplace_back(bi.shape, bi.value);
    }
    return b;
}

grad::Array apply_act(Act act, const grad::Array& x) {
    switch (act) {
        case Act::linear: return x;
        case Act::leaky_relu: return grad::leaky_relu(x, leaky_slope);
        case Act::sigmoid: return grad::sigmoid(x);
        case Act::softplus: return grad::softplus(x);
    }
    return x;
}

grad::Array forward(const BoundMlp& bound, const grad::Array& x) {
    if (x.cols() != bound.spec->dims.front())
        throw std::invalid_argument(bound.spec->name + ": input has " + std::to_string(x.cols()) +
                                    " columns, expected " +
                                    std::to_string(bound.spec->dims.front()));
    grad::Array h = x;
    for (std::size_t l = 0; l < bound.weights.size(); ++l)
        h = apply_act(bound.spec->acts[l], grad::add(grad::matmul(h, bound.weights[l]),
                                                     bound.biases[l]));
    return h;
}

std::vector<grad::Array> leaves(const BoundMlp& bound) {
    std::vector<grad::Array> out;
    for (std::size_t l = 0; l < bound.weights.size(); ++l) {
        out.push_back(bound.weights[l]);
        out.push_back(bound.biases[l]);
    }
    return out;
}

Adam::Adam(AdamConfig cfg, std::vector<ParamStore*> stores)
    : cfg_(cfg), stores_(std::move(stores)) {
    for (const auto* s : stores_)
        for (const auto& p : s->items()) {
            m_.emplace_back(p.value.size(), 0.0);
            u_.emplace_back(p.value.size(), 0.0);
        }
}

void Adam::step(const std::vector<grad::Array>& grads) {
    std::size_t n = 0;
    for (const auto* s : stores_) n += s->count();
    if (grads.size() != n)
        throw std::invalid_argument("adam: got " + std::to_string(grads.size()) +
                                    " gradients for " + std::to_string(n) + " parameters");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t idx = 0;
    for (auto* s : stores_) {
        for (auto& p : s->items()) {
            const auto& g = grads[idx];
            if (g.empty())
                throw std::invalid_argument("adam: missing gradient for parameter " + p.name);
            if (!(g.shape() == p.shape))
                throw std::invalid_argument("adam: gradient shape mismatch for " + p.name);
            auto& m = m_[idx];
            auto& u = u_[idx];
            const auto& gv = g.values();
            for (std::size_t i = 0; i < m.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gv[i];
                u[i] = cfg_.beta2 * u[i] + (1.0 - cfg_.beta2) * gv[i] * gv[i];
                const double mhat = m[i] / bc1;
                const double uhat = u[i] / bc2;
                p.value[i] -= cfg_.lr * mhat / (std::sqrt(uhat) + cfg_.epsilon);
            }
            ++idx;
        }
    }
}

std::vector<Param> Adam::moments_m() const {
    std::vector<Param> out;
    std::size_t idx = 0;
    for (const auto* s : stores_)
        for (const auto& p : s->items()) out.push_back(Param{p.name, p.shape, m_[idx++]});
    return out;
}

std::vector<Param> Adam::moments_u() const {
    std::vector<Param> out;
    std::size_t idx = 0;
    for (const auto* s : stores_)
        for (const auto& p : s->items()) out.push_back(Param{p.name, p.shape, u_[idx++]});
    return out;
}

void Adam::restore(long t, const std::vector<std::vector<double>>& m,
                   const std::vector<std::vector<double>>& u) {
    if (m.size() != m_.size() || u.size() != u_.size())
        throw std::invalid_argument("adam: restore size mismatch");
    t_ = t;
    m_ = m;
    u_ = u;
}

// ---- archive -------------------------------------------------------------------

namespace {

constexpr char archive_magic[8] = {'S', 'P', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

void put_f64_le(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64_le(out, bits);
}

double get_f64_le(const unsigned char* p) {
    const std::uint64_t bits = get_u64_le(p);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace

void write_archive(const std::string& path, const nlohmann::ordered_json& meta,
                   const std::vector<ArchiveEntry>& arrays) {
    nlohmann::ordered_json header;
    header["meta"] = meta;
    header["arrays"] = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;
    for (const auto& a : arrays) {
        header["arrays"].push_back({{"name", a.name},
                                    {"rows", a.shape.rows},
                                    {"cols", a.shape.cols},
                                    {"offset", offset}});
        offset += a.data.size();
    }
    const std::string header_str = header.dump();
    std::string blob;
    blob.reserve(16 + header_str.size() + offset * 8);
    blob.append(archive_magic, 8);
    put_u64_le(blob, header_str.size());
    blob += header_str;
    for (const auto& a : arrays)
        for (double d : a.data) put_f64_le(blob, d);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

Archive read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (blob.size() < 16 || std::memcmp(blob.data(), archive_magic, 8) != 0)
        throw std::runtime_error(path + ": not a parameter archive");
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    const std::uint64_t hlen = get_u64_le(bytes + 8);
    if (16 + hlen > blob.size()) throw std::runtime_error(path + ": truncated header");
    const nlohmann::ordered_json header =
        nlohmann::ordered_json::parse(blob.substr(16, hlen));

    Archive ar;
    ar.meta = header.at("meta");
    const std::size_t payload_begin = 16 + hlen;
    for (const auto& e : header.at("arrays")) {
        ArchiveEntry entry;
        entry.name = e.at("name").get<std::string>();
        entry.shape = {e.at("rows").get<long>(), e.at("cols").get<long>()};
        const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
        const std::size_t n = static_cast<std::size_t>(entry.shape.size());
        if (payload_begin + (offset + n) * 8 > blob.size())
            throw std::runtime_error(path + ": truncated payload for " + entry.name);
        entry.data.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            entry.data[i] = get_f64_le(bytes + payload_begin + (offset + i) * 8);
        ar.arrays.push_back(std::move(entry));
    }
    return ar;
}

const ArchiveEntry& Archive::at(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return a;
    throw std::runtime_error("archive has no entry named " + name);
}

bool Archive::contains(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return true;
    return false;
}

std::vector<ArchiveEntry> to_entries(const ParamStore& store) {
    std::vector<ArchiveEntry> out;
    for (const auto& p : store.items()) out.push_back(ArchiveEntry{p.name, p.shape, p.value});
    return out;
}

void load_entries(ParamStore& store, const Archive& archive) {
    for (auto& p : store.items()) {
        const auto& e = archive.at(p.name);
        if (!(e.shape == p.shape))
            throw std::runtime_error("archive entry " + p.name + " has shape " +
                                     grad::to_string(e.shape) + ", expected " +
                                     grad::to_string(p.shape));
        p.value = e.data;
    }
}

}  // namespace sparseprior::nn
