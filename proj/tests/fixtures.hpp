#pragma once

// Seeded generators and hand-scripted agents shared by the test binaries.

#include <cstdint>
#include <string>
#include <vector>

#include "ecopool/ecosystem.hpp"
#include "ecopool/gridworld.hpp"
#include "ecopool/policy.hpp"
#include "ecopool/ppo.hpp"
#include "ecopool/rng.hpp"

namespace fixture {

using namespace ecopool;

inline PolicyParams random_params(Rng& rng, const Architecture& arch, double scale = 0.8) {
    PolicyParams p = zero_params(arch);
    p.for_each([&](double& v) { v = rng.uniform(-scale, scale); });
    return p;
}

/// Small dense inputs, random actions, log-probs near the current policy so
/// that ratios straddle the clip boundaries.
inline Minibatch random_minibatch(Rng& rng, const PolicyParams& params, int batch) {
    const Architecture arch = params.architecture();
    Minibatch mb;
    mb.features.resize(arch.input, batch);
    mb.old_log_probs.resize(batch);
    mb.advantages.resize(batch);
    mb.returns.resize(batch);
    for (int b = 0; b < batch; ++b) {
        for (int i = 0; i < arch.input; ++i) mb.features(i, b) = rng.uniform(-1.0, 1.0);
        const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(arch.actions)));
        mb.actions.push_back(a);
        const auto out = forward_features(params, mb.features.col(b));
        mb.old_log_probs(b) = out.dist.log_probs[static_cast<std::size_t>(a)] + rng.uniform(-0.4, 0.4);
        mb.advantages(b) = rng.uniform(-2.0, 2.0);
        mb.returns(b) = rng.uniform(-1.0, 1.0);
    }
    return mb;
}

inline Trajectory random_trajectory(Rng& rng, int length) {
    Trajectory t;
    for (int i = 0; i < length; ++i) {
        t.observations.emplace_back();
        t.actions.push_back(static_cast<Action>(rng.below(3)));
        t.rewards.push_back(rng.uniform01() < 0.2 ? rng.uniform01() : 0.0);
        t.dones.push_back(rng.uniform01() < 0.15 ? 1 : 0);
        t.log_probs.push_back(-rng.uniform(0.0, 2.0));
        t.values.push_back(rng.uniform(-1.0, 1.0));
    }
    t.last_value = t.dones.back() ? 0.0 : rng.uniform(-1.0, 1.0);
    return t;
}

/// Greedy action is always `a`, whatever the observation.
inline PolicyParams constant_policy(Action a, const Architecture& arch = {}) {
    PolicyParams p = zero_params(arch);
    p.actor.back().bias(static_cast<int>(a)) = 5.0;
    return p;
}

/// Straight east-west corridor with the goal `distance` cells ahead of the agent.
inline Level corridor(int distance, int max_steps = 100) {
    const int width = distance + 3;
    std::string row0(static_cast<std::size_t>(width), '#');
    std::string row1 = "#>";
    row1 += std::string(static_cast<std::size_t>(distance - 1), '.');
    row1 += "G#";
    return parse_ascii(row0 + "\n" + row1 + "\n" + row0 + "\n", max_steps).level;
}

inline Agent scripted_agent(AgentId id, Action a, std::set<std::uint64_t> solved = {}) {
    return Agent{id, constant_policy(a), std::move(solved), 0};
}

}  // namespace fixture
