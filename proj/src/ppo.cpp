#include "ecopool/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ecopool {

namespace {

void require(bool ok, const char* field, const char* rule) {
    if (!ok) throw std::invalid_argument(std::string("ppo.") + field + " " + rule);
}

}  // namespace

void PpoConfig::validate() const {
    require(gamma > 0.0 && gamma <= 1.0, "gamma", "must be in (0, 1]");
    require(lambda >= 0.0 && lambda <= 1.0, "lambda", "must be in [0, 1]");
    require(clip_epsilon > 0.0, "clip_epsilon", "must be > 0");
    require(rollout_steps >= 1, "rollout_steps", "must be >= 1");
    require(minibatch_size >= 1, "minibatch_size", "must be >= 1");
    require(update_epochs >= 1, "update_epochs", "must be >= 1");
    require(learning_rate > 0.0, "learning_rate", "must be > 0");
    require(value_coef >= 0.0, "value_coef", "must be >= 0");
    require(entropy_coef >= 0.0, "entropy_coef", "must be >= 0");
    require(minibatch_size <= rollout_steps, "minibatch_size", "must not exceed rollout_steps");
}

Trajectory collect_rollout(const PolicyParams& params, const Level& level, int n_steps, Rng& rng) {
    if (n_steps < 1) throw std::invalid_argument("collect_rollout needs n_steps >= 1");
    Trajectory traj;
    const auto n = static_cast<std::size_t>(n_steps);
    traj.observations.reserve(n);
    traj.actions.reserve(n);
    traj.rewards.reserve(n);
    traj.dones.reserve(n);
    traj.log_probs.reserve(n);
    traj.values.reserve(n);

    auto [state, obs] = reset(level);
    for (int t = 0; t < n_steps; ++t) {
        const PolicyOutput out = forward(params, obs);
        const Action a = sample_action(out.dist, rng);
        StepResult next = step(state, a);

        traj.observations.push_back(obs);
        traj.actions.push_back(a);
        traj.rewards.push_back(next.reward);
        traj.dones.push_back(next.done ? 1 : 0);
        traj.log_probs.push_back(out.dist.log_prob(a));
        traj.values.push_back(out.value);

        if (next.done) {
            auto fresh = reset(level);
            state = fresh.state;
            obs = fresh.observation;
        } else {
            state = next.state;
            obs = next.observation;
        }
    }
    traj.last_value = traj.dones.back() ? 0.0 : forward(params, obs).value;
    return traj;
}

AdvantageEstimate compute_gae(const Trajectory& traj, double gamma, double lambda) {
    const std::size_t n = traj.size();
    if (n == 0) throw std::invalid_argument("compute_gae on empty trajectory");

    AdvantageEstimate est;
    est.advantages.assign(n, 0.0);
    est.returns.assign(n, 0.0);
    double running = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double not_done = traj.dones[i] ? 0.0 : 1.0;
        const double next_value = i + 1 < n ? traj.values[i + 1] : traj.last_value;
        const double delta = traj.rewards[i] + gamma * next_value * not_done - traj.values[i];
        running = delta + gamma * lambda * not_done * running;
        est.advantages[i] = running;
        est.returns[i] = running + traj.values[i];
    }

    const double mean = std::accumulate(est.advantages.begin(), est.advantages.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : est.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double denom = std::sqrt(var) + 1e-8;
    est.normalized.resize(n);
    for (std::size_t i = 0; i < n; ++i) est.normalized[i] = (est.advantages[i] - mean) / denom;
    return est;
}

UpdateResult ppo_update(const PolicyParams& params, const Trajectory& traj, const PpoConfig& cfg, Rng& rng,
                        AdamState& optimizer) {
    const std::size_t n = traj.size();
    if (n < static_cast<std::size_t>(cfg.minibatch_size))
        throw std::invalid_argument("trajectory shorter than minibatch_size");

    const AdvantageEstimate est = compute_gae(traj, cfg.gamma, cfg.lambda);
    Eigen::MatrixXd features(kObsSize, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) features.col(static_cast<Eigen::Index>(i)) = encode_observation(traj.observations[i]);

    UpdateResult result{params, {}};
    const LossSpec spec = cfg.loss_spec();
    const AdamConfig adam = cfg.adam();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    double clip_sum = 0.0;

    for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.minibatch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.minibatch_size));
            const auto m = static_cast<Eigen::Index>(end - start);
            Minibatch mb;
            mb.features.resize(kObsSize, m);
            mb.actions.resize(static_cast<std::size_t>(m));
            mb.old_log_probs.resize(m);
            mb.advantages.resize(m);
            mb.returns.resize(m);
            for (Eigen::Index k = 0; k < m; ++k) {
                const std::size_t idx = order[start + static_cast<std::size_t>(k)];
                mb.features.col(k) = features.col(static_cast<Eigen::Index>(idx));
                mb.actions[static_cast<std::size_t>(k)] = static_cast<int>(traj.actions[idx]);
                mb.old_log_probs(k) = traj.log_probs[idx];
                mb.advantages(k) = est.normalized[idx];
                mb.returns(k) = est.returns[idx];
            }

            LossResult loss = grad_loss(result.params, mb, spec);
            if (result.stats.minibatches == 0) {
                result.stats.first_surrogate = loss.surrogate;
                result.stats.first_mean_ratio = loss.mean_ratio;
            }
            result.stats.minibatches += 1;
            result.stats.last_loss = loss.loss;
            clip_sum += loss.clip_fraction;

            if (cfg.max_grad_norm > 0.0) {
                const double norm = global_norm(loss.grads);
                if (norm > cfg.max_grad_norm) scale_in_place(loss.grads, cfg.max_grad_norm / (norm + 1e-6));
            }
            adam_step(result.params, loss.grads, optimizer, adam);
        }
    }
    result.stats.mean_clip_fraction = clip_sum / result.stats.minibatches;
    return result;
}

LearnResult learn_epoch(const PolicyParams& params, AdamState& optimizer, const Level& level,
                        const PpoConfig& cfg, Rng& rng) {
    const Trajectory traj = collect_rollout(params, level, cfg.rollout_steps, rng);
    UpdateResult updated = ppo_update(params, traj, cfg, rng, optimizer);
    return {std::move(updated.params), cfg.rollout_steps};
}

double test_agent(const PolicyParams& params, const Level& level) {
    auto [state, obs] = reset(level);
    double total = 0.0;
    while (!state.done) {
        const StepResult next = step(state, forward(params, obs).dist.greedy());
        total += next.reward;
        state = next.state;
        obs = next.observation;
    }
    return total;
}

}  // namespace ecopool
