#pragma once

// Feed-forward actor-critic with hand-written backpropagation.
//
// Actor and critic are separate tanh MLPs over the same flattened
// observation. Everything is double precision so gradients can be checked
// against finite differences.

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecopool/gridworld.hpp"
#include "ecopool/rng.hpp"

namespace ecopool {

/// Raised when a forward pass or loss produces a non-finite value.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Architecture {
    int input = kObsSize;
    std::vector<int> hidden{64, 64};
    int actions = kNumActions;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Fully connected layer: out = weight * in + bias, weight is (out x in).
struct Dense {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    friend bool operator==(const Dense& a, const Dense& b) {
        return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
               a.bias.size() == b.bias.size() && (a.weight.array() == b.weight.array()).all() &&
               (a.bias.array() == b.bias.array()).all();
    }
};

struct PolicyParams {
    std::vector<Dense> actor;
    std::vector<Dense> critic;

    Architecture architecture() const;
    std::size_t parameter_count() const;

    /// Visits every scalar in a fixed order: actor then critic, per layer
    /// weight (row-major) then bias.
    template <typename F>
    void for_each(F&& f);
    template <typename F>
    void for_each(F&& f) const;

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// Per-parameter partial derivatives, shape-congruent with PolicyParams.
using Gradients = PolicyParams;

/// Same shape as `arch`, all zeros.
PolicyParams zero_params(const Architecture& arch);
PolicyParams zeros_like(const PolicyParams& p);

/// Glorot-uniform weights U(-a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases.
PolicyParams init_params(std::uint64_t seed, const Architecture& arch = {});

inline PolicyParams clone_params(const PolicyParams& src) { return src; }

/// Channel 0 divided by its max code; channels 1 and 2 are always 0.
Eigen::VectorXd encode_observation(const Observation& obs);

struct ActionDistribution {
    std::array<double, kNumActions> probs{};
    std::array<double, kNumActions> log_probs{};  // log-softmax, finite even when a prob underflows
    /// Index of the largest probability, lowest index on ties.
    Action greedy() const;
    double log_prob(Action a) const;
};

struct PolicyOutput {
    ActionDistribution dist;
    double value = 0.0;
};

PolicyOutput forward(const PolicyParams& params, const Observation& obs);
PolicyOutput forward_features(const PolicyParams& params, const Eigen::VectorXd& features);

/// Inverse-CDF draw over the three probabilities.
Action sample_action(const ActionDistribution& dist, Rng& rng);

struct Minibatch {
    Eigen::MatrixXd features;  // input x batch
    std::vector<int> actions;
    Eigen::VectorXd old_log_probs;
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;

    std::size_t size() const { return actions.size(); }
};

/// Minimized objective: -clipped_surrogate + value_coef * mse(returns, V) - entropy_coef * entropy.
struct LossSpec {
    double clip_epsilon = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
};

struct LossResult {
    double loss = 0.0;
    double surrogate = 0.0;  // mean clipped surrogate (maximized)
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double mean_ratio = 0.0;
    Gradients grads;
};

/// Loss value only, for finite-difference checks.
double loss_value(const PolicyParams& params, const Minibatch& batch, const LossSpec& spec);
LossResult grad_loss(const PolicyParams& params, const Minibatch& batch, const LossSpec& spec);

double global_norm(const Gradients& g);
void scale_in_place(Gradients& g, double factor);

struct AdamConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment estimates live beside the parameters but never travel with them:
/// every new agent starts from a fresh state.
struct AdamState {
    PolicyParams first_moment;
    PolicyParams second_moment;
    std::int64_t steps = 0;
};

void adam_step(PolicyParams& params, const Gradients& grads, AdamState& state, const AdamConfig& cfg);

// Binary layout: "ECOPARAM", u32 version, u32 header length, JSON header
// {"arch":[in,h1,...],"heads":{"actor":A,"critic":1},"version":1}, then
// little-endian float64 values in for_each order.
std::string serialize_params(const PolicyParams& params);
PolicyParams deserialize_params(const std::string& bytes);
void save_params(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_params(const std::filesystem::path& path);

/// FNV-1a over the serialized bytes.
std::uint64_t params_fingerprint(const PolicyParams& params);

template <typename F>
void PolicyParams::for_each(F&& f) {
    for (auto* head : {&actor, &critic})
        for (Dense& layer : *head) {
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) f(layer.weight(r, c));
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) f(layer.bias(i));
        }
}

template <typename F>
void PolicyParams::for_each(F&& f) const {
    for (const auto* head : {&actor, &critic})
        for (const Dense& layer : *head) {
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) f(layer.weight(r, c));
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) f(layer.bias(i));
        }
}

}  // namespace ecopool
