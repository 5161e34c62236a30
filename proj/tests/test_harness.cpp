#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "ecopool/harness.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ecopool;
using fixture::scripted_agent;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.n_train_envs = 4;
    cfg.eval_every = 2;
    cfg.n_eval_envs = 3;
    cfg.n_runs = 2;
    cfg.budget = 6;
    cfg.ppo.rollout_steps = 128;
    cfg.ppo.minibatch_size = 64;
    cfg.ppo.update_epochs = 2;
    return cfg;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ecopool_harness_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("zeta takes the best agent per level, then averages") {
    Pool pool = make_pool(InitStrategy::Basic, 0.8, 0);
    pool.agents = {scripted_agent(0, Action::TurnLeft), scripted_agent(1, Action::Forward)};
    const std::vector<Level> levels = {fixture::corridor(3), fixture::corridor(30)};
    const ZetaResult max = adaptability_index(pool, levels);
    CHECK(max.per_level == std::vector<double>{0.973, goal_reward(30, 100)});
    CHECK(max.zeta == (0.973 + goal_reward(30, 100)) / 2.0);
    CHECK(max.tests_run == 4);
    const ZetaResult mean = adaptability_index(pool, levels, ZetaMode::MeanOverPool);
    CHECK(mean.per_level[0] == 0.973 / 2.0);
}

TEST_CASE("empty pool scores zero everywhere") {
    const Pool pool = make_pool(InitStrategy::Forked, 0.8, 0);
    const std::vector<Level> levels = {generate_level(1, {}), generate_level(2, {})};
    const ZetaResult z = adaptability_index(pool, levels);
    CHECK(z.zeta == 0.0);
    CHECK(z.tests_run == 0);
    CHECK_THROWS(adaptability_index(pool, std::span<const Level>{}));
}

TEST_CASE("zeta matches a mean-of-max recomputation on random pools") {
    Rng rng(3);
    double worst = 0.0;
    for (int c = 0; c < 5; ++c) {
        Pool pool = make_pool(InitStrategy::Basic, 0.8, 0);
        const int n_agents = 1 + static_cast<int>(rng.below(4));
        for (int a = 0; a < n_agents; ++a)
            pool.agents.push_back(Agent{static_cast<AgentId>(a), init_params(rng.next_u64()), {}, 0});
        pool.agents.push_back(scripted_agent(99, Action::Forward));
        std::vector<Level> levels;
        for (int l = 0; l < 6; ++l) levels.push_back(generate_level(rng.next_u64(), {}));
        double total = 0.0;
        for (const Level& level : levels) {
            double best = 0.0;
            for (const Agent& a : pool.agents) best = std::max(best, oracle::greedy_episode_reward(a.params, level));
            total += best;
        }
        worst = std::max(worst, std::abs(adaptability_index(pool, levels).zeta - total / 6.0));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("evaluation does not touch the pool") {
    Pool pool = make_pool(InitStrategy::Forked, 0.8, 4);
    pool.agents = {Agent{0, init_params(1), {3}, 3}, scripted_agent(1, Action::Forward, {4})};
    const auto before = pool_fingerprint(pool);
    const std::vector<Level> levels = {generate_level(1, {}), fixture::corridor(3)};
    (void)adaptability_index(pool, levels);
    CHECK(pool_fingerprint(pool) == before);
}

TEST_CASE("mean and standard error") {
    const std::vector<double> xs = {1.0, 2.0, 3.0};
    const MeanStderr m = mean_and_stderr(xs);
    CHECK(m.mean == 2.0);
    CHECK(m.stderr_ == 1.0 / std::sqrt(3.0));
    const std::vector<double> one = {4.5};
    CHECK(mean_and_stderr(one).stderr_ == 0.0);
}

TEST_CASE("aggregation matches an independent recomputation") {
    Rng rng(5);
    for (int c = 0; c < 20; ++c) {
        std::vector<std::vector<MetricsRecord>> runs(5);
        for (auto& run : runs)
            for (int k = 1; k <= 4; ++k) {
                MetricsRecord r;
                r.envs_seen = 10 * k;
                r.zeta = rng.uniform01();
                r.pool_size = static_cast<int>(rng.below(30));
                r.cumulative_training_steps = static_cast<std::int64_t>(rng.below(1'000'000));
                r.cumulative_tests = static_cast<std::int64_t>(rng.below(10'000));
                r.failures = static_cast<int>(rng.below(5));
                run.push_back(r);
            }
        const auto agg = aggregate_runs(runs);
        REQUIRE(agg.size() == 4);
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(agg[k].envs_seen == runs[0][k].envs_seen);
            for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
                std::vector<double> column;
                for (const auto& run : runs) column.push_back(metric_value(run[k], m));
                const auto [mean, se] = oracle::mean_stderr(column);
                const double scale = std::max(1.0, std::abs(mean));
                CHECK(std::abs(agg[k].metrics[m].mean - mean) <= 1e-12 * scale);
                CHECK(std::abs(agg[k].metrics[m].stderr_ - se) <= 1e-12 * scale);
            }
        }
    }
}

TEST_CASE("aggregation rejects mismatched checkpoints") {
    MetricsRecord a, b;
    a.envs_seen = 10;
    b.envs_seen = 20;
    CHECK_THROWS_AS(aggregate_runs({{a}, {b}}), std::invalid_argument);
    CHECK_THROWS_AS(aggregate_runs({{a}, {a, a}}), std::invalid_argument);
    CHECK_THROWS_AS(aggregate_runs({}), std::invalid_argument);
}

TEST_CASE("seed schedule") {
    ExperimentConfig cfg;
    cfg.n_train_envs = 50;
    CHECK(cfg.train_seed(0, 0) == 0);
    CHECK(cfg.train_seed(2, 7) == 107);
    CHECK(cfg.eval_seed(3) == 1'000'000'003);
}

TEST_CASE("config validation") {
    CHECK_NOTHROW(ExperimentConfig{}.validate());
    ExperimentConfig cfg;
    cfg.eval_seed_base = 100;
    try {
        cfg.validate();
        FAIL("expected overlap error");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "eval_seed_base");
        CHECK(std::string(e.what()).find("seed ranges overlap") != std::string::npos);
    }
    cfg = {};
    cfg.eval_every = 7;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.level.width = 8;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.train_seed_base = std::numeric_limits<std::uint64_t>::max() - 10;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config json is strict and round trips") {
    ExperimentConfig cfg = tiny_config();
    cfg.strategy = InitStrategy::Forked;
    cfg.zeta_mode = ZetaMode::MeanOverPool;
    const auto j = config_to_json(cfg);
    const ExperimentConfig back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.strategy == InitStrategy::Forked);
    CHECK(back.ppo == cfg.ppo);

    auto bad = j;
    bad["n_trian_envs"] = 3;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["ppo"]["gamma"] = "high";
    try {
        config_from_json(bad);
        FAIL("expected type error");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "ppo.gamma");
    }
    bad = j;
    bad["env"]["depth"] = 3;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    const ExperimentConfig partial = config_from_json({{"n_runs", 3}});
    CHECK(partial.n_runs == 3);
    CHECK(partial.n_train_envs == 500);
}

TEST_CASE("a tiny experiment keeps its counters consistent") {
    const ExperimentConfig cfg = tiny_config();
    const RunResult r = run_experiment(cfg, 0);
    CHECK(r.error.empty());
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].envs_seen == 2);
    CHECK(r.records[1].envs_seen == 4);
    CHECK(r.outcomes.size() == 4);
    CHECK(r.dominance_violations == 0);

    std::int64_t steps = 0, tests = 0;
    int failures = 0;
    for (const EnvOutcome& o : r.outcomes) {
        steps += o.training_steps_used;
        tests += o.tests_run;
        failures += o.failed;
        CHECK(o.training_steps_used == std::int64_t{o.epochs_used} * cfg.ppo.rollout_steps);
        CHECK(o.level_seed < 4);
    }
    CHECK(r.records.back().cumulative_training_steps == steps);
    CHECK(r.records.back().failures == failures);
    // each evaluation tests every agent on every held-out level
    CHECK(r.records.back().cumulative_tests ==
          tests + (r.records[0].pool_size + r.records[1].pool_size) * cfg.n_eval_envs);
    CHECK(r.records[0].cumulative_training_steps <= r.records[1].cumulative_training_steps);
    CHECK(r.records.back().pool_size == static_cast<int>(r.pool.agents.size()));

    const AuditReport audit = audit_run(r, cfg.threshold);
    CHECK(audit.held_out_violations == 0);
    CHECK(audit.credit_violations == 0);
}

TEST_CASE("runs are reproducible and independent of thread count") {
    const ExperimentConfig cfg = tiny_config();
    const auto serial = run_experiments(cfg, 1);
    const auto parallel = run_experiments(cfg, 2);
    REQUIRE(serial.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(serial[i].records == parallel[i].records);
        CHECK(pool_fingerprint(serial[i].pool) == pool_fingerprint(parallel[i].pool));
        CHECK(metrics_csv(serial[i].records) == metrics_csv(parallel[i].records));
    }
    // run 1 trains on its own window
    CHECK(serial[1].outcomes.front().level_seed == 4);
    CHECK(serial[0].eval_seeds == serial[1].eval_seeds);
}

TEST_CASE("metrics export formats") {
    std::vector<MetricsRecord> recs(2);
    recs[0] = {50, 0.25, 3, 51200, 400, 0};
    recs[1] = {100, 0.1, 5, 102400, 900, 1};
    CHECK(metrics_csv(recs) ==
          "envs_seen,zeta,pool_size,cum_steps,cum_tests,failures\n"
          "50,0.25,3,51200,400,0\n"
          "100,0.1,5,102400,900,1\n");
    CHECK(metrics_from_json(metrics_json(recs)) == recs);
    CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
    CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);

    const auto dir = scratch("export");
    export_metrics(recs, ExportFormat::Csv, dir / "m.csv");
    export_metrics(recs, ExportFormat::Json, dir / "m.json");
    CHECK(read_text_file(dir / "m.csv") == metrics_csv(recs));
    CHECK(metrics_from_json(nlohmann::json::parse(read_text_file(dir / "m.json"))) == recs);
    std::filesystem::remove_all(dir);
    CHECK_THROWS(read_text_file(dir / "missing.csv"));
}

TEST_CASE("audit log carries one line per level and credit") {
    const RunResult r = run_experiment(tiny_config(), 0);
    const std::string log = audit_log_jsonl(r);
    std::size_t lines = 0, envs = 0, credits = 0;
    std::size_t pos = 0;
    while (pos < log.size()) {
        const std::size_t end = log.find('\n', pos);
        const auto j = nlohmann::json::parse(log.substr(pos, end - pos));
        envs += j.at("event") == "env";
        credits += j.at("event") == "credit";
        ++lines;
        pos = end + 1;
    }
    CHECK(envs == r.outcomes.size());
    CHECK(credits == r.credits.size());
    CHECK(lines == envs + credits);
}

TEST_CASE("audit flags a missing credit") {
    RunResult r;
    EnvOutcome o;
    o.level_seed = 5;
    r.outcomes.push_back(o);
    CHECK(audit_run(r, 0.8).credit_violations == 1);
    r.credits.push_back({5, 0, 0.85, CreditKind::Solver});
    r.pool.agents.push_back(scripted_agent(0, Action::Forward, {5}));
    CHECK(audit_run(r, 0.8).credit_violations == 0);
    r.credits[0].reward = 0.5;
    CHECK(audit_run(r, 0.8).credit_violations == 2);
    r.eval_seeds = {5};
    CHECK(audit_run(r, 0.8).held_out_violations == 1);
}

TEST_CASE("compare table columns") {
    AggregateRecord rec;
    rec.envs_seen = 10;
    rec.metrics[0] = {0.5, 0.1};
    rec.metrics[1] = {3, 0};
    rec.metrics[2] = {1024, 0};
    const std::vector<StrategyAggregate> table = {{InitStrategy::Basic, {rec}}, {InitStrategy::Forked, {rec}}};
    CHECK(compare_csv(table) ==
          "envs_seen,basic_zeta,basic_pool_size,basic_cum_steps,forked_zeta,forked_pool_size,forked_cum_steps\n"
          "10,0.5,3,1024,0.5,3,1024\n");
    ChartSeries s{"basic", {10, 20}, {0.1, 0.2}, {0.01, 0.02}};
    const std::string svg = svg_line_chart("zeta", "zeta", std::span<const ChartSeries>(&s, 1));
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("basic") != std::string::npos);
}

TEST_CASE("run outputs land on disk") {
    const RunResult r = run_experiment(tiny_config(), 0);
    const auto dir = scratch("outputs");
    write_run_outputs(r, dir);
    CHECK(read_text_file(dir / "metrics.csv") == metrics_csv(r.records));
    CHECK(std::filesystem::exists(dir / "audit.jsonl"));
    CHECK(pool_fingerprint(load_pool(dir / "pool")) == pool_fingerprint(r.pool));
    std::filesystem::remove_all(dir);
}
