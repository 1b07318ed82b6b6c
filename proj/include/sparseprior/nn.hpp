#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sparseprior/grad.hpp"
#include "sparseprior/rng.hpp"

namespace sparseprior::nn {

enum class Act { linear, leaky_relu, sigmoid, softplus };

Act act_from_string(const std::string& s);
std::string to_string(Act a);

// Hidden activations default to leaky-relu with slope 0.2.
inline constexpr double leaky_slope = 0.2;

struct Param {
    std::string name;
    grad::Shape shape;
    std::vector<double> value;
};

class ParamStore {
public:
    void add(std::string name, grad::Shape shape, std::vector<double> value);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::vector<Param>& items() { return items_; }
    const std::vector<Param>& items() const { return items_; }
    std::size_t count() const { return items_.size(); }

private:
    std::vector<Param> items_;
};

struct Mlp {
    std::string name;        // parameter name prefix
    std::vector<long> dims;  // at least [in, out]
    std::vector<Act> acts;   // one per layer
    ParamStore params;       // "<name>/layer<i>/W", "<name>/layer<i>/b"
};

// Weights drawn as sqrt(2/fan_in) * U(-sqrt(3), sqrt(3)) (zero mean, variance
// 2/fan_in); biases zero. Deterministic for a given rng state.
Mlp init_mlp(const std::string& name, const std::vector<long>& dims, const std::vector<Act>& acts,
             Rng& rng);

// Parameters lifted onto a tape (or left as constants for evaluation).
struct BoundMlp {
    const Mlp* spec = nullptr;
    std::vector<grad::Array> weights;
    std::vector<grad::Array> biases;
};

BoundMlp bind(const Mlp& mlp, grad::Tape& tape);
BoundMlp bind_const(const Mlp& mlp);

grad::Array apply_act(Act act, const grad::Array& x);
grad::Array forward(const BoundMlp& bound, const grad::Array& x);

// W0, b0, W1, b1, ... -- matches the store's registry order.
std::vector<grad::Array> leaves(const BoundMlp& bound);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam over the concatenated items of one or more stores.
class Adam {
public:
    Adam(AdamConfig cfg, std::vector<ParamStore*> stores);

    // grads align with the concatenation of store items; a missing (empty)
    // gradient for any registered parameter is an error.
    void step(const std::vector<grad::Array>& grads);

    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

    // Moment access for checkpointing, keyed like the parameters.
    std::vector<Param> moments_m() const;
    std::vector<Param> moments_u() const;
    void restore(long t, const std::vector<std::vector<double>>& m,
                 const std::vector<std::vector<double>>& u);

private:
    AdamConfig cfg_;
    std::vector<ParamStore*> stores_;
    std::vector<std::vector<double>> m_, u_;
    long t_ = 0;
};

// ---- checkpoint container ----------------------------------------------------
// Flat binary archive: magic, u64 little-endian JSON header length, JSON
// header, then named float64 payloads (little-endian). The header carries
// shapes/offsets plus caller metadata (dims, activation plan, seed, ...).

struct ArchiveEntry {
    std::string name;
    grad::Shape shape;
    std::vector<double> data;
};

void write_archive(const std::string& path, const nlohmann::ordered_json& meta,
                   const std::vector<ArchiveEntry>& arrays);

struct Archive {
    nlohmann::ordered_json meta;
    std::vector<ArchiveEntry> arrays;
    const ArchiveEntry& at(const std::string& name) const;
    bool contains(const std::string& name) const;
};

Archive read_archive(const std::string& path);

// Store <-> archive helpers.
std::vector<ArchiveEntry> to_entries(const ParamStore& store);
void load_entries(ParamStore& store, const Archive& archive);

}  // namespace sparseprior::nn
