#include "ecopool/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ecopool/harness.hpp"

namespace ecopool::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config_path;
    std::string strategy;
    int envs = 0;
    int runs = 0;
    int eval_every = 0;
    int budget = 0;
    int jobs = 1;
    std::string out_dir;

    CLI::Option* strategy_opt = nullptr;
    CLI::Option* envs_opt = nullptr;
    CLI::Option* runs_opt = nullptr;
    CLI::Option* eval_opt = nullptr;
    CLI::Option* budget_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

void add_experiment_flags(CLI::App& cmd, Overrides& o, bool with_strategy) {
    cmd.add_option("--config", o.config_path, "Experiment config file (JSON)");
    if (with_strategy)
        o.strategy_opt = cmd.add_option("--strategy", o.strategy, "basic|random|best|forked")
                             ->check(CLI::IsMember({"basic", "random", "best", "forked"}));
    o.envs_opt = cmd.add_option("--envs", o.envs, "Number of training environments");
    o.runs_opt = cmd.add_option("--runs", o.runs, "Number of independent runs");
    o.eval_opt = cmd.add_option("--eval-every", o.eval_every, "Evaluation cadence in environments");
    o.budget_opt = cmd.add_option("--budget", o.budget, "Max learn-epochs per new agent");
    cmd.add_option("--jobs", o.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
    o.out_opt = cmd.add_option("--out", o.out_dir, "Output directory");
}

// Precedence: --out, then ECOPOOL_OUT, then the config's output_dir.
ExperimentConfig resolve_config(const Overrides& o) {
    ExperimentConfig cfg;
    if (!o.config_path.empty()) cfg = load_config(o.config_path);
    if (o.strategy_opt && o.strategy_opt->count()) cfg.strategy = parse_strategy(o.strategy);
    if (o.envs_opt->count()) cfg.n_train_envs = o.envs;
    if (o.runs_opt->count()) cfg.n_runs = o.runs;
    if (o.eval_opt->count()) cfg.eval_every = o.eval_every;
    if (o.budget_opt->count()) cfg.budget = o.budget;
    if (const char* env = std::getenv("ECOPOOL_OUT"); env && *env) cfg.output_dir = env;
    if (o.out_opt->count()) cfg.output_dir = o.out_dir;
    cfg.validate();
    return cfg;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class SidecarLog {
public:
    explicit SidecarLog(const fs::path& path) : out_(path, std::ios::app) {}
    void line(const std::string& text) {
        if (out_) out_ << utc_timestamp() << ' ' << text << '\n' << std::flush;
    }

private:
    std::ofstream out_;
};

struct ExperimentOutput {
    std::vector<AggregateRecord> aggregate;
    bool ok = true;
};

// Runs every repetition of `cfg` and writes the run directory layout under `dir`.
ExperimentOutput execute(const ExperimentConfig& cfg, int jobs, const fs::path& dir, std::ostream& err) {
    fs::create_directories(dir);
    SidecarLog log(dir / "run.log");
    log.line("start strategy=" + std::string(to_string(cfg.strategy)) + " runs=" + std::to_string(cfg.n_runs));

    auto progress = [&](int run, int seen, const EnvOutcome&) {
        if (seen % cfg.eval_every == 0) {
            err << "[" << to_string(cfg.strategy) << "] run " << run << ": " << seen << "/" << cfg.n_train_envs
                << " environments\n";
            log.line("run " + std::to_string(run) + " envs " + std::to_string(seen));
        }
    };
    const std::vector<RunResult> results = run_experiments(cfg, jobs, progress);

    ExperimentOutput output;
    nlohmann::json errors = nlohmann::json::array();
    std::vector<std::vector<MetricsRecord>> complete;
    for (const RunResult& r : results) {
        write_run_outputs(r, dir / ("run_" + std::to_string(r.run)));
        if (!r.error.empty()) {
            output.ok = false;
            errors.push_back(r.error);
            err << "error: " << r.error << '\n';
            log.line(r.error);
        } else {
            complete.push_back(r.records);
        }
    }

    const nlohmann::json meta = {
        {"strategy", to_string(cfg.strategy)},
        {"runs", cfg.n_runs},
        {"config", config_to_json(cfg)},
        {"errors", errors},
    };
    write_text_file(dir / "run.json", meta.dump(2) + '\n');

    if (!complete.empty()) {
        output.aggregate = aggregate_runs(complete);
        write_text_file(dir / "aggregate.csv", aggregate_csv(output.aggregate));
        write_text_file(dir / "aggregate.json", aggregate_json(output.aggregate).dump(2) + '\n');
    }
    log.line(output.ok ? "done" : "done with errors");
    return output;
}

int cmd_run(const Overrides& o, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = resolve_config(o);
    const fs::path dir = cfg.output_dir;
    const ExperimentOutput result = execute(cfg, o.jobs, dir, err);
    out << "wrote " << dir.string() << '\n';
    return result.ok ? kExitOk : kExitRuntime;
}

int cmd_compare(const Overrides& o, const std::vector<std::string>& strategy_names, std::ostream& out,
                std::ostream& err) {
    if (strategy_names.size() < 2) throw ConfigError("strategies", "compare needs at least two strategies");
    std::vector<InitStrategy> strategies;
    for (const auto& s : strategy_names) {
        try {
            strategies.push_back(parse_strategy(s));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("strategies", e.what());
        }
    }

    const ExperimentConfig base = resolve_config(o);
    const fs::path root = base.output_dir;
    std::vector<StrategyAggregate> table;
    bool ok = true;
    for (InitStrategy s : strategies) {
        ExperimentConfig cfg = base;
        cfg.strategy = s;
        const ExperimentOutput result = execute(cfg, o.jobs, root / std::string(to_string(s)), err);
        ok = ok && result.ok;
        if (!result.ok) continue;
        table.push_back({s, result.aggregate});
        write_text_file(root / "plotdata" / (std::string(to_string(s)) + "_aggregate.csv"),
                        aggregate_csv(result.aggregate));
    }
    if (!ok) return kExitRuntime;

    write_text_file(root / "compare.csv", compare_csv(table));
    static constexpr std::pair<std::size_t, const char*> kCharts[] = {
        {0, "adaptability index"}, {1, "agents in pool"}, {2, "cumulative training steps"}};
    for (auto [metric, label] : kCharts) {
        std::vector<ChartSeries> series;
        for (const auto& s : table) {
            ChartSeries cs{std::string(to_string(s.strategy)), {}, {}, {}};
            for (const auto& r : s.records) {
                cs.x.push_back(r.envs_seen);
                cs.y.push_back(r.metrics[metric].mean);
                cs.err.push_back(r.metrics[metric].stderr_);
            }
            series.push_back(std::move(cs));
        }
        write_text_file(root / "plotdata" / (std::string(kMetricNames[metric]) + ".svg"),
                        svg_line_chart(label, label, series));
    }
    out << "wrote " << (root / "compare.csv").string() << '\n';
    return kExitOk;
}

int cmd_show_env(std::uint64_t seed, const std::string& config_path, std::optional<LevelConfig> dims, bool json_only,
                 std::ostream& out) {
    LevelConfig level_cfg;
    if (!config_path.empty()) level_cfg = load_config(config_path).level;
    if (dims) level_cfg = *dims;
    try {
        validate_level_config(level_cfg);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("env", e.what());
    }
    const Level level = generate_level(seed, level_cfg);
    const nlohmann::json j = level_to_json(level);
    if (json_only) {
        out << j.dump() << '\n';
        return kExitOk;
    }
    out << render_ascii(reset(level).state) << '\n' << j.dump() << '\n';
    return kExitOk;
}

int cmd_inspect_pool(const fs::path& path, std::ostream& out) {
    const Pool pool = load_pool(path);
    out << "strategy: " << to_string(pool.strategy) << '\n'
        << "threshold: " << format_number(pool.threshold) << '\n'
        << "agents: " << pool.agents.size() << '\n'
        << "main agent: " << (pool.main_agent ? "yes" : "no") << '\n';
    std::size_t covered = 0;
    for (const Agent& a : pool.agents) covered += a.solved.size();
    out << "credited levels (with overlap): " << covered << '\n';
    for (const Agent& a : pool.agents) {
        out << "  agent " << a.id << "  birth=" << a.birth_env << "  solved=" << a.solved.size() << "  [";
        bool first = true;
        for (auto s : a.solved) {
            out << (first ? "" : " ") << s;
            first = false;
        }
        out << "]\n";
    }
    return kExitOk;
}

int cmd_export(const fs::path& dir, const std::string& format_name, std::ostream& out) {
    const ExportFormat format = parse_export_format(format_name);
    const std::string ext = format == ExportFormat::Csv ? ".csv" : ".json";
    if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + ": not a directory");

    std::vector<fs::path> run_dirs;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && entry.path().filename().string().starts_with("run_")) run_dirs.push_back(entry.path());
    std::sort(run_dirs.begin(), run_dirs.end());
    if (run_dirs.empty()) throw std::runtime_error(dir.string() + ": no run_* directories");

    std::vector<std::vector<MetricsRecord>> runs;
    for (const auto& rd : run_dirs) {
        const auto records = metrics_from_json(nlohmann::json::parse(read_text_file(rd / "metrics.json")));
        export_metrics(records, format, rd / ("metrics" + ext));
        out << (rd / ("metrics" + ext)).string() << '\n';
        runs.push_back(records);
    }
    const auto agg = aggregate_runs(runs);
    const fs::path agg_path = dir / ("aggregate" + ext);
    write_text_file(agg_path, format == ExportFormat::Csv ? aggregate_csv(agg) : aggregate_json(agg).dump(2) + '\n');
    out << agg_path.string() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Agent pool experiments on procedurally generated FourRooms levels", "ecopool"};
    app.require_subcommand(1, 1);

    Overrides run_opts;
    auto* run = app.add_subcommand("run", "Run an experiment (all runs) and write metrics");
    add_experiment_flags(*run, run_opts, true);

    Overrides cmp_opts;
    std::vector<std::string> strategies{"basic", "forked"};
    auto* compare = app.add_subcommand("compare", "Run several strategies on one shared level schedule");
    add_experiment_flags(*compare, cmp_opts, false);
    compare->add_option("--strategies", strategies, "Comma-separated strategies")->delimiter(',');

    std::uint64_t seed = 0;
    std::string show_config;
    bool show_json = false;
    LevelConfig dims;
    auto* show = app.add_subcommand("show-env", "Print a generated level");
    show->add_option("--seed", seed, "Level seed")->required();
    show->add_option("--config", show_config, "Take env dimensions from this config");
    auto* width_opt = show->add_option("--width", dims.width, "Grid width");
    auto* height_opt = show->add_option("--height", dims.height, "Grid height");
    auto* steps_opt = show->add_option("--max-steps", dims.max_steps, "Step budget");
    show->add_flag("--json", show_json, "Print only the canonical JSON");

    std::string pool_path;
    auto* inspect = app.add_subcommand("inspect-pool", "Summarize a pool checkpoint directory");
    inspect->add_option("path", pool_path, "Checkpoint directory (contains pool.json)")->required();

    std::string export_dir;
    std::string export_format = "csv";
    auto* exp = app.add_subcommand("export", "Re-emit a run directory's metrics as csv or json");
    exp->add_option("run_dir", export_dir, "Output directory of a run")->required();
    exp->add_option("--format", export_format, "csv|json")->check(CLI::IsMember({"csv", "json"}));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*run) return cmd_run(run_opts, out, err);
        if (*compare) return cmd_compare(cmp_opts, strategies, out, err);
        if (*show) {
            std::optional<LevelConfig> override_dims;
            if (width_opt->count() || height_opt->count() || steps_opt->count()) {
                LevelConfig base;
                if (!show_config.empty()) base = load_config(show_config).level;
                if (width_opt->count()) base.width = dims.width;
                if (height_opt->count()) base.height = dims.height;
                if (steps_opt->count()) base.max_steps = dims.max_steps;
                override_dims = base;
            }
            return cmd_show_env(seed, show_config, override_dims, show_json, out);
        }
        if (*inspect) return cmd_inspect_pool(pool_path, out);
        if (*exp) return cmd_export(export_dir, export_format, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace ecopool::cli
