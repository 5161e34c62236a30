#pragma once

// Pool of specialist agents.
//
// A new level is first offered to the agents already in the pool. When none
// of them reaches the solve threshold a new agent is created, initialized
// according to the pool's strategy, trained on that level alone, and added.
// Agents whose whole solved-set is covered by the newcomer are pruned.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ecopool/gridworld.hpp"
#include "ecopool/policy.hpp"
#include "ecopool/ppo.hpp"
#include "ecopool/rng.hpp"

namespace ecopool {

enum class InitStrategy { Basic, Random, Best, Forked };

std::string_view to_string(InitStrategy s);
/// Accepts "basic", "random", "best", "forked". Throws std::invalid_argument.
InitStrategy parse_strategy(std::string_view text);

using AgentId = std::uint64_t;

struct Agent {
    AgentId id = 0;
    PolicyParams params;
    std::set<std::uint64_t> solved;  // level seeds credited by a passing test
    std::uint64_t birth_env = 0;
};

enum class CreditKind { Solver, Birth, Absorbed };
std::string_view to_string(CreditKind k);

/// One insertion into some agent's solved-set, with the test reward that justified it.
struct CreditEvent {
    std::uint64_t level_seed = 0;
    AgentId agent_id = 0;
    double reward = 0.0;
    CreditKind kind = CreditKind::Solver;
};

struct Pool {
    std::vector<Agent> agents;
    std::optional<PolicyParams> main_agent;  // present iff strategy == Forked
    InitStrategy strategy = InitStrategy::Basic;
    double threshold = 0.8;
    Rng rng;
    AgentId next_id = 0;
    std::vector<CreditEvent> credit_log;

    const Agent* find(AgentId id) const;
    Agent* find(AgentId id);
};

/// Empty pool. For Forked the main agent is created here from `seed`.
Pool make_pool(InitStrategy strategy, double threshold, std::uint64_t seed, const Architecture& arch = {});

struct EcosystemConfig {
    LevelConfig level;
    PpoConfig ppo;
    int budget = 300;  // max learn-epochs per new agent
    bool optimize_pool = true;
    Architecture arch;
};

struct ScanResult {
    std::optional<AgentId> solver;
    double solver_reward = 0.0;
    std::optional<AgentId> best_id;
    double best_reward = 0.0;
    int tests_run = 0;
};

/// Tests pool agents in order. Stops at the first solver unless the strategy
/// is Best, which always scans the whole pool. The best agent is the first
/// one reaching the maximum observed reward.
ScanResult find_best_agent(const Pool& pool, const Level& level);

enum class InitSource { Fresh, RandomClone, BestClone, Fork };
std::string_view to_string(InitSource s);

struct InitResult {
    Agent agent;
    InitSource source = InitSource::Fresh;
    bool fell_back = false;  // the strategy had no eligible source
};

/// Builds a new agent (fresh id, empty solved-set) for `birth_seed`.
/// Random and Best fall back to Basic when they have no source.
InitResult initialize_agent(Pool& pool, std::optional<AgentId> best_id, std::uint64_t birth_seed,
                            const Architecture& arch = {});

struct TrainOutcome {
    Agent agent;
    int epochs_used = 0;
    std::int64_t steps_used = 0;
    int tests_run = 0;
    double final_reward = 0.0;
    bool failed = false;
};

/// learn_epoch + test_agent until the test reaches `threshold` or `budget`
/// epochs have run. Adam state starts fresh.
TrainOutcome train_until_solved(Agent agent, const Level& level, const PpoConfig& cfg, double threshold,
                                int budget, Rng& rng);

struct OptimizeStats {
    int tests_run = 0;
    std::vector<AgentId> removed;
};

/// Offers every level credited to the other agents to `new_agent_id`, credits
/// the ones it solves, removes agents it fully covers, then sorts the pool.
OptimizeStats optimize_pool(Pool& pool, AgentId new_agent_id, const LevelConfig& level_cfg);

/// Stable order: |solved| descending, id ascending.
void sort_pool(Pool& pool);

struct EnvOutcome {
    std::uint64_t level_seed = 0;
    std::optional<AgentId> solved_by;
    bool created_new = false;
    std::int64_t training_steps_used = 0;
    int epochs_used = 0;
    int tests_run = 0;
    bool failed = false;
    double credit_reward = 0.0;
    std::optional<InitSource> init_source;
    bool init_fell_back = false;
    std::vector<AgentId> removed;
};

/// One pass of the pool algorithm for one level. On training failure the
/// pool's agents and main agent are left unchanged; only its rng and id
/// counter advance.
EnvOutcome ecosystem_learn(Pool& pool, const Level& level, const EcosystemConfig& cfg);

/// Whether any agent's solved-set is a subset of another's (equality included).
bool has_dominated_agent(const Pool& pool);

// Checkpoint directory layout: pool.json plus agent_<id>.params and
// main_agent.params in the same directory.
void save_pool(const Pool& pool, const std::filesystem::path& dir);
Pool load_pool(const std::filesystem::path& dir);

/// Hash of everything a checkpoint would contain.
std::uint64_t pool_fingerprint(const Pool& pool);

}  // namespace ecopool
