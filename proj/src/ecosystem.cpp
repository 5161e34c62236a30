#include "ecopool/ecosystem.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ecopool {

std::string_view to_string(InitStrategy s) {
    switch (s) {
        case InitStrategy::Basic: return "basic";
        case InitStrategy::Random: return "random";
        case InitStrategy::Best: return "best";
        case InitStrategy::Forked: return "forked";
    }
    return "?";
}

InitStrategy parse_strategy(std::string_view text) {
    if (text == "basic") return InitStrategy::Basic;
    if (text == "random") return InitStrategy::Random;
    if (text == "best") return InitStrategy::Best;
    if (text == "forked") return InitStrategy::Forked;
    throw std::invalid_argument("unknown strategy '" + std::string(text) + "' (expected basic|random|best|forked)");
}

std::string_view to_string(CreditKind k) {
    switch (k) {
        case CreditKind::Solver: return "solver";
        case CreditKind::Birth: return "birth";
        case CreditKind::Absorbed: return "absorbed";
    }
    return "?";
}

std::string_view to_string(InitSource s) {
    switch (s) {
        case InitSource::Fresh: return "fresh";
        case InitSource::RandomClone: return "random-clone";
        case InitSource::BestClone: return "best-clone";
        case InitSource::Fork: return "fork";
    }
    return "?";
}

const Agent* Pool::find(AgentId id) const {
    auto it = std::find_if(agents.begin(), agents.end(), [id](const Agent& a) { return a.id == id; });
    return it == agents.end() ? nullptr : &*it;
}

Agent* Pool::find(AgentId id) {
    auto it = std::find_if(agents.begin(), agents.end(), [id](const Agent& a) { return a.id == id; });
    return it == agents.end() ? nullptr : &*it;
}

Pool make_pool(InitStrategy strategy, double threshold, std::uint64_t seed, const Architecture& arch) {
    Pool pool;
    pool.strategy = strategy;
    pool.threshold = threshold;
    pool.rng = Rng(derive_seed(seed, "pool"));
    if (strategy == InitStrategy::Forked) pool.main_agent = init_params(derive_seed(seed, "main-agent"), arch);
    return pool;
}

ScanResult find_best_agent(const Pool& pool, const Level& level) {
    ScanResult r;
    const bool full_scan = pool.strategy == InitStrategy::Best;
    for (const Agent& agent : pool.agents) {
        const double reward = test_agent(agent.params, level);
        r.tests_run += 1;
        if (!r.best_id || reward > r.best_reward) {
            r.best_id = agent.id;
            r.best_reward = reward;
        }
        if (!r.solver && reward >= pool.threshold) {
            r.solver = agent.id;
            r.solver_reward = reward;
            if (!full_scan) break;
        }
    }
    return r;
}

InitResult initialize_agent(Pool& pool, std::optional<AgentId> best_id, std::uint64_t birth_seed,
                            const Architecture& arch) {
    InitResult out;
    out.agent.id = pool.next_id++;
    out.agent.birth_env = birth_seed;

    auto fresh = [&] {
        out.agent.params = init_params(pool.rng.next_u64(), arch);
        out.source = InitSource::Fresh;
    };

    switch (pool.strategy) {
        case InitStrategy::Basic: fresh(); break;
        case InitStrategy::Random:
            if (pool.agents.empty()) {
                fresh();
                out.fell_back = true;
            } else {
                out.agent.params = clone_params(pool.agents[pool.rng.below(pool.agents.size())].params);
                out.source = InitSource::RandomClone;
            }
            break;
        case InitStrategy::Best: {
            const Agent* best = best_id ? pool.find(*best_id) : nullptr;
            if (best == nullptr) {
                fresh();
                out.fell_back = true;
            } else {
                out.agent.params = clone_params(best->params);
                out.source = InitSource::BestClone;
            }
            break;
        }
        case InitStrategy::Forked:
            if (!pool.main_agent) pool.main_agent = init_params(pool.rng.next_u64(), arch);
            out.agent.params = clone_params(*pool.main_agent);
            out.source = InitSource::Fork;
            break;
    }
    return out;
}

TrainOutcome train_until_solved(Agent agent, const Level& level, const PpoConfig& cfg, double threshold,
                                int budget, Rng& rng) {
    if (budget < 1) throw std::invalid_argument("training budget must be >= 1");
    TrainOutcome out;
    AdamState optimizer;
    double reward = test_agent(agent.params, level);
    out.tests_run = 1;
    while (reward < threshold && out.epochs_used < budget) {
        LearnResult learned = learn_epoch(agent.params, optimizer, level, cfg, rng);
        agent.params = std::move(learned.params);
        out.steps_used += learned.steps_consumed;
        out.epochs_used += 1;
        reward = test_agent(agent.params, level);
        out.tests_run += 1;
    }
    out.final_reward = reward;
    out.failed = reward < threshold;
    out.agent = std::move(agent);
    return out;
}

void sort_pool(Pool& pool) {
    std::stable_sort(pool.agents.begin(), pool.agents.end(), [](const Agent& a, const Agent& b) {
        if (a.solved.size() != b.solved.size()) return a.solved.size() > b.solved.size();
        return a.id < b.id;
    });
}

OptimizeStats optimize_pool(Pool& pool, AgentId new_agent_id, const LevelConfig& level_cfg) {
    OptimizeStats stats;
    if (pool.find(new_agent_id) == nullptr) throw std::invalid_argument("optimize_pool: new agent not in pool");

    std::vector<AgentId> others;
    for (const Agent& a : pool.agents)
        if (a.id != new_agent_id) others.push_back(a.id);

    for (AgentId other_id : others) {
        Agent& fresh = *pool.find(new_agent_id);
        const Agent& other = *pool.find(other_id);
        for (std::uint64_t seed : other.solved) {
            if (fresh.solved.contains(seed)) continue;  // already verified for this agent
            const Level level = generate_level(seed, level_cfg);
            const double reward = test_agent(fresh.params, level);
            stats.tests_run += 1;
            if (reward >= pool.threshold) {
                fresh.solved.insert(seed);
                pool.credit_log.push_back({seed, fresh.id, reward, CreditKind::Absorbed});
            }
        }
        if (std::includes(fresh.solved.begin(), fresh.solved.end(), other.solved.begin(), other.solved.end())) {
            stats.removed.push_back(other_id);
            std::erase_if(pool.agents, [other_id](const Agent& a) { return a.id == other_id; });
        }
    }
    sort_pool(pool);
    return stats;
}

EnvOutcome ecosystem_learn(Pool& pool, const Level& level, const EcosystemConfig& cfg) {
    EnvOutcome out;
    out.level_seed = level.seed;

    const ScanResult scan = find_best_agent(pool, level);
    out.tests_run += scan.tests_run;

    if (scan.solver) {
        Agent& solver = *pool.find(*scan.solver);
        solver.solved.insert(level.seed);
        pool.credit_log.push_back({level.seed, solver.id, scan.solver_reward, CreditKind::Solver});
        out.solved_by = solver.id;
        out.credit_reward = scan.solver_reward;
        return out;
    }

    InitResult init = initialize_agent(pool, scan.best_id, level.seed, cfg.arch);
    out.created_new = true;
    out.init_source = init.source;
    out.init_fell_back = init.fell_back;

    Rng train_rng(pool.rng.next_u64());
    TrainOutcome trained = train_until_solved(std::move(init.agent), level, cfg.ppo, pool.threshold, cfg.budget,
                                              train_rng);
    out.training_steps_used = trained.steps_used;
    out.epochs_used = trained.epochs_used;
    out.tests_run += trained.tests_run;
    if (trained.failed) {
        out.failed = true;
        return out;
    }

    Agent agent = std::move(trained.agent);
    agent.solved.insert(level.seed);
    pool.credit_log.push_back({level.seed, agent.id, trained.final_reward, CreditKind::Birth});
    out.solved_by = agent.id;
    out.credit_reward = trained.final_reward;
    if (pool.strategy == InitStrategy::Forked) pool.main_agent = clone_params(agent.params);

    const AgentId new_id = agent.id;
    pool.agents.push_back(std::move(agent));
    if (cfg.optimize_pool) {
        OptimizeStats stats = optimize_pool(pool, new_id, cfg.level);
        out.tests_run += stats.tests_run;
        out.removed = std::move(stats.removed);
    } else {
        sort_pool(pool);
    }
    return out;
}

bool has_dominated_agent(const Pool& pool) {
    for (const Agent& f : pool.agents)
        for (const Agent& g : pool.agents) {
            if (f.id == g.id) continue;
            if (std::includes(g.solved.begin(), g.solved.end(), f.solved.begin(), f.solved.end())) return true;
        }
    return false;
}

namespace {

std::string agent_file(AgentId id) { return "agent_" + std::to_string(id) + ".params"; }

nlohmann::json pool_manifest(const Pool& pool) {
    nlohmann::json agents = nlohmann::json::array();
    for (const Agent& a : pool.agents)
        agents.push_back({
            {"id", a.id},
            {"birth_env", a.birth_env},
            {"solved", a.solved},
            {"params_ref", agent_file(a.id)},
        });
    return {
        {"version", 1},
        {"strategy", to_string(pool.strategy)},
        {"threshold", pool.threshold},
        {"next_id", pool.next_id},
        {"rng_state", pool.rng.state()},
        {"agents", std::move(agents)},
        {"main_agent_ref", pool.main_agent ? nlohmann::json("main_agent.params") : nlohmann::json(nullptr)},
    };
}

}  // namespace

void save_pool(const Pool& pool, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const Agent& a : pool.agents) save_params(a.params, dir / agent_file(a.id));
    if (pool.main_agent) save_params(*pool.main_agent, dir / "main_agent.params");
    std::ofstream out(dir / "pool.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "pool.json").string());
    out << pool_manifest(pool).dump(2) << '\n';
}

Pool load_pool(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "pool.json";
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot read " + manifest_path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(manifest_path.string() + ": " + e.what());
    }
    if (j.at("version").get<int>() != 1) throw std::runtime_error(manifest_path.string() + ": unsupported version");

    Pool pool;
    pool.strategy = parse_strategy(j.at("strategy").get<std::string>());
    pool.threshold = j.at("threshold").get<double>();
    pool.next_id = j.at("next_id").get<AgentId>();
    pool.rng = Rng::from_state(j.at("rng_state").get<std::string>());
    for (const auto& a : j.at("agents")) {
        Agent agent;
        agent.id = a.at("id").get<AgentId>();
        agent.birth_env = a.at("birth_env").get<std::uint64_t>();
        agent.solved = a.at("solved").get<std::set<std::uint64_t>>();
        agent.params = load_params(dir / a.at("params_ref").get<std::string>());
        pool.agents.push_back(std::move(agent));
    }
    if (!j.at("main_agent_ref").is_null())
        pool.main_agent = load_params(dir / j.at("main_agent_ref").get<std::string>());
    return pool;
}

std::uint64_t pool_fingerprint(const Pool& pool) {
    std::uint64_t h = label_hash(pool_manifest(pool).dump());
    for (const Agent& a : pool.agents) h = splitmix64(h ^ params_fingerprint(a.params));
    if (pool.main_agent) h = splitmix64(h ^ params_fingerprint(*pool.main_agent));
    return h;
}

}  // namespace ecopool
