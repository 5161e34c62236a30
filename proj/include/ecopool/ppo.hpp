#pragma once

#include <cstdint>
#include <vector>

#include "ecopool/gridworld.hpp"
#include "ecopool/policy.hpp"
#include "ecopool/rng.hpp"

namespace ecopool {

struct PpoConfig {
    double gamma = 0.99;
    double lambda = 0.95;
    double clip_epsilon = 0.2;
    int rollout_steps = 512;
    int minibatch_size = 64;
    int update_epochs = 10;
    double learning_rate = 3e-4;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    double max_grad_norm = 0.5;  // <= 0 disables clipping

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
    LossSpec loss_spec() const { return {clip_epsilon, value_coef, entropy_coef}; }
    AdamConfig adam() const { return {learning_rate, 0.9, 0.999, 1e-8}; }

    friend bool operator==(const PpoConfig&, const PpoConfig&) = default;
};

/// Parallel per-step arrays. `last_value` bootstraps the step after the final
/// transition and is 0 when that transition ended an episode.
struct Trajectory {
    std::vector<Observation> observations;
    std::vector<Action> actions;
    std::vector<double> rewards;
    std::vector<std::uint8_t> dones;
    std::vector<double> log_probs;
    std::vector<double> values;
    double last_value = 0.0;

    std::size_t size() const { return actions.size(); }
};

/// Runs episodes back to back (reset on done) until n_steps transitions are stored.
Trajectory collect_rollout(const PolicyParams& params, const Level& level, int n_steps, Rng& rng);

struct AdvantageEstimate {
    std::vector<double> advantages;  // raw GAE
    std::vector<double> normalized;  // zero mean, unit variance
    std::vector<double> returns;     // advantages + values
};

/// Generalized advantage estimation, truncated at episode boundaries.
/// Throws std::invalid_argument on an empty trajectory.
AdvantageEstimate compute_gae(const Trajectory& traj, double gamma, double lambda);

struct UpdateStats {
    int minibatches = 0;
    double first_surrogate = 0.0;
    double first_mean_ratio = 0.0;
    double last_loss = 0.0;
    double mean_clip_fraction = 0.0;
};

struct UpdateResult {
    PolicyParams params;
    UpdateStats stats;
};

/// update_epochs passes of shuffled minibatch clipped-surrogate descent.
/// `optimizer` carries Adam moments across calls for the same agent.
UpdateResult ppo_update(const PolicyParams& params, const Trajectory& traj, const PpoConfig& cfg, Rng& rng,
                        AdamState& optimizer);

struct LearnResult {
    PolicyParams params;
    int steps_consumed = 0;
};

/// One rollout of cfg.rollout_steps transitions followed by one ppo_update.
LearnResult learn_epoch(const PolicyParams& params, AdamState& optimizer, const Level& level,
                        const PpoConfig& cfg, Rng& rng);

/// Total reward of one greedy episode. No learning, no randomness.
double test_agent(const PolicyParams& params, const Level& level);

}  // namespace ecopool
