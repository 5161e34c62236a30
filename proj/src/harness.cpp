#include "ecopool/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace ecopool {

std::string_view to_string(ZetaMode m) { return m == ZetaMode::MaxOverPool ? "max" : "mean"; }

ZetaMode parse_zeta_mode(std::string_view text) {
    if (text == "max") return ZetaMode::MaxOverPool;
    if (text == "mean") return ZetaMode::MeanOverPool;
    throw std::invalid_argument("unknown zeta mode '" + std::string(text) + "' (expected max|mean)");
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    if (n_train_envs < 1) throw ConfigError("n_train_envs", "must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every", "must be >= 1");
    if (n_train_envs % eval_every != 0) throw ConfigError("eval_every", "must divide n_train_envs");
    if (n_eval_envs < 1) throw ConfigError("n_eval_envs", "must be >= 1");
    if (n_runs < 1) throw ConfigError("n_runs", "must be >= 1");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("threshold", "must be in (0, 1]");
    if (budget < 1) throw ConfigError("budget", "must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    try {
        validate_level_config(level);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("env", e.what());
    }
    try {
        ppo.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("ppo", e.what());
    }

    using Wide = unsigned __int128;
    constexpr Wide kMax = std::numeric_limits<std::uint64_t>::max();
    const Wide train_end = Wide{train_seed_base} + Wide(n_runs) * Wide(n_train_envs);
    const Wide eval_end = Wide{eval_seed_base} + Wide(n_eval_envs);
    if (train_end - 1 > kMax) throw ConfigError("train_seed_base", "seed range overflows 64 bits");
    if (eval_end - 1 > kMax) throw ConfigError("eval_seed_base", "seed range overflows 64 bits");
    if (Wide{train_seed_base} < eval_end && Wide{eval_seed_base} < train_end)
        throw ConfigError("eval_seed_base", "seed ranges overlap");
}

std::uint64_t ExperimentConfig::train_seed(int run, int index) const {
    return train_seed_base + static_cast<std::uint64_t>(run) * static_cast<std::uint64_t>(n_train_envs) +
           static_cast<std::uint64_t>(index);
}

std::uint64_t ExperimentConfig::eval_seed(int index) const { return eval_seed_base + static_cast<std::uint64_t>(index); }

EcosystemConfig ExperimentConfig::ecosystem() const {
    EcosystemConfig e;
    e.level = level;
    e.ppo = ppo;
    e.budget = budget;
    e.optimize_pool = optimize_pool;
    return e;
}

namespace {

class ObjectReader {
public:
    ObjectReader(const nlohmann::json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
        if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "must be an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        known_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!it->is_number_integer()) throw ConfigError(path(key), "must be an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (it->is_number_integer() && !it->is_number_unsigned())
                        throw ConfigError(path(key), "must be non-negative");
                }
            }
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw ConfigError(path(key), "must be a boolean");
            }
            if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw ConfigError(path(key), "must be a number");
            }
            out = it->get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path(key), e.what());
        }
    }

    template <typename T, typename Parse>
    void read_enum(const char* key, T& out, Parse parse) {
        std::string text;
        read(key, text);
        if (obj_.contains(key)) {
            try {
                out = parse(text);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(path(key), e.what());
            }
        }
    }

    const nlohmann::json* child(const char* key) {
        known_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : obj_.items())
            if (!known_.contains(key)) throw ConfigError(path(key), "unknown key");
    }

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

private:
    const nlohmann::json& obj_;
    std::string prefix_;
    std::set<std::string> known_;
};

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    ObjectReader root(j, "");
    root.read_enum("strategy", cfg.strategy, parse_strategy);
    root.read("n_train_envs", cfg.n_train_envs);
    root.read("eval_every", cfg.eval_every);
    root.read("n_eval_envs", cfg.n_eval_envs);
    root.read("train_seed_base", cfg.train_seed_base);
    root.read("eval_seed_base", cfg.eval_seed_base);
    root.read("n_runs", cfg.n_runs);
    root.read("seed", cfg.seed);
    root.read("threshold", cfg.threshold);
    root.read("budget", cfg.budget);
    root.read("optimize_pool", cfg.optimize_pool);
    root.read_enum("zeta_mode", cfg.zeta_mode, parse_zeta_mode);
    root.read("output_dir", cfg.output_dir);

    if (const auto* env = root.child("env")) {
        ObjectReader r(*env, "env");
        r.read("width", cfg.level.width);
        r.read("height", cfg.level.height);
        r.read("max_steps", cfg.level.max_steps);
        r.reject_unknown();
    }
    if (const auto* ppo = root.child("ppo")) {
        ObjectReader r(*ppo, "ppo");
        r.read("gamma", cfg.ppo.gamma);
        r.read("lambda", cfg.ppo.lambda);
        r.read("clip_epsilon", cfg.ppo.clip_epsilon);
        r.read("rollout_steps", cfg.ppo.rollout_steps);
        r.read("minibatch_size", cfg.ppo.minibatch_size);
        r.read("update_epochs", cfg.ppo.update_epochs);
        r.read("learning_rate", cfg.ppo.learning_rate);
        r.read("value_coef", cfg.ppo.value_coef);
        r.read("entropy_coef", cfg.ppo.entropy_coef);
        r.read("max_grad_norm", cfg.ppo.max_grad_norm);
        r.reject_unknown();
    }
    root.reject_unknown();
    cfg.validate();
    return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    return {
        {"strategy", to_string(cfg.strategy)},
        {"n_train_envs", cfg.n_train_envs},
        {"eval_every", cfg.eval_every},
        {"n_eval_envs", cfg.n_eval_envs},
        {"train_seed_base", cfg.train_seed_base},
        {"eval_seed_base", cfg.eval_seed_base},
        {"n_runs", cfg.n_runs},
        {"seed", cfg.seed},
        {"threshold", cfg.threshold},
        {"budget", cfg.budget},
        {"optimize_pool", cfg.optimize_pool},
        {"zeta_mode", to_string(cfg.zeta_mode)},
        {"output_dir", cfg.output_dir},
        {"env", {{"width", cfg.level.width}, {"height", cfg.level.height}, {"max_steps", cfg.level.max_steps}}},
        {"ppo",
         {
             {"gamma", cfg.ppo.gamma},
             {"lambda", cfg.ppo.lambda},
             {"clip_epsilon", cfg.ppo.clip_epsilon},
             {"rollout_steps", cfg.ppo.rollout_steps},
             {"minibatch_size", cfg.ppo.minibatch_size},
             {"update_epochs", cfg.ppo.update_epochs},
             {"learning_rate", cfg.ppo.learning_rate},
             {"value_coef", cfg.ppo.value_coef},
             {"entropy_coef", cfg.ppo.entropy_coef},
             {"max_grad_norm", cfg.ppo.max_grad_norm},
         }},
    };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<root>", path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Evaluation and runs

ZetaResult adaptability_index(const Pool& pool, std::span<const Level> eval_levels, ZetaMode mode) {
    if (eval_levels.empty()) throw std::invalid_argument("adaptability_index needs at least one level");
    ZetaResult r;
    r.per_level.reserve(eval_levels.size());
    for (const Level& level : eval_levels) {
        double reward = 0.0;
        if (!pool.agents.empty()) {
            double best = 0.0;
            double sum = 0.0;
            for (const Agent& agent : pool.agents) {
                const double v = test_agent(agent.params, level);
                r.tests_run += 1;
                best = std::max(best, v);
                sum += v;
            }
            reward = mode == ZetaMode::MaxOverPool ? best : sum / static_cast<double>(pool.agents.size());
        }
        r.per_level.push_back(reward);
    }
    double total = 0.0;
    for (double v : r.per_level) total += v;
    r.zeta = total / static_cast<double>(r.per_level.size());
    return r;
}

RunResult run_experiment(const ExperimentConfig& cfg, int run, const ProgressFn& progress) {
    cfg.validate();
    RunResult result;
    result.run = run;
    result.pool = make_pool(cfg.strategy, cfg.threshold, derive_seed(cfg.seed, "run", static_cast<std::uint64_t>(run)));
    const EcosystemConfig eco = cfg.ecosystem();

    std::vector<Level> eval_levels;
    for (int j = 0; j < cfg.n_eval_envs; ++j) {
        result.eval_seeds.push_back(cfg.eval_seed(j));
        eval_levels.push_back(generate_level(cfg.eval_seed(j), cfg.level));
    }

    MetricsRecord counters;
    try {
        for (int i = 0; i < cfg.n_train_envs; ++i) {
            const Level level = generate_level(cfg.train_seed(run, i), cfg.level);
            EnvOutcome outcome = ecosystem_learn(result.pool, level, eco);

            counters.envs_seen = i + 1;
            counters.cumulative_training_steps += outcome.training_steps_used;
            counters.cumulative_tests += outcome.tests_run;
            counters.failures += outcome.failed ? 1 : 0;
            if (has_dominated_agent(result.pool)) result.dominance_violations += 1;
            if (progress) progress(run, i + 1, outcome);
            result.outcomes.push_back(std::move(outcome));

            if ((i + 1) % cfg.eval_every == 0) {
                const ZetaResult z = adaptability_index(result.pool, eval_levels, cfg.zeta_mode);
                counters.cumulative_tests += z.tests_run;
                counters.zeta = z.zeta;
                counters.pool_size = static_cast<int>(result.pool.agents.size());
                result.records.push_back(counters);
            }
        }
    } catch (const std::exception& e) {
        result.error = "run " + std::to_string(run) + " aborted after " + std::to_string(counters.envs_seen) +
                       " environments: " + e.what();
    }
    result.credits = std::move(result.pool.credit_log);
    result.pool.credit_log.clear();
    return result;
}

std::vector<RunResult> run_experiments(const ExperimentConfig& cfg, int jobs, const ProgressFn& progress) {
    cfg.validate();
    std::vector<RunResult> results(static_cast<std::size_t>(cfg.n_runs));
    std::vector<std::exception_ptr> errors(results.size());
    std::atomic<int> next{0};
    std::mutex progress_mutex;
    ProgressFn locked;
    if (progress)
        locked = [&](int r, int n, const EnvOutcome& o) {
            std::lock_guard lock(progress_mutex);
            progress(r, n, o);
        };

    auto worker = [&] {
        for (int r = next++; r < cfg.n_runs; r = next++) {
            try {
                results[static_cast<std::size_t>(r)] = run_experiment(cfg, r, locked);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        }
    };
    const int workers = std::clamp(jobs, 1, cfg.n_runs);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

// ---------------------------------------------------------------------------
// Aggregation

double metric_value(const MetricsRecord& r, std::size_t metric) {
    switch (metric) {
        case 0: return r.zeta;
        case 1: return r.pool_size;
        case 2: return static_cast<double>(r.cumulative_training_steps);
        case 3: return static_cast<double>(r.cumulative_tests);
        case 4: return r.failures;
        default: throw std::out_of_range("metric index");
    }
}

MeanStderr mean_and_stderr(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_and_stderr of nothing");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

std::vector<AggregateRecord> aggregate_runs(const std::vector<std::vector<MetricsRecord>>& runs) {
    if (runs.empty()) throw std::invalid_argument("aggregate_runs needs at least one run");
    const std::size_t checkpoints = runs.front().size();
    for (const auto& run : runs) {
        if (run.size() != checkpoints) throw std::invalid_argument("runs have different checkpoint counts");
        for (std::size_t c = 0; c < checkpoints; ++c)
            if (run[c].envs_seen != runs.front()[c].envs_seen)
                throw std::invalid_argument("runs disagree on envs_seen at checkpoint " + std::to_string(c));
    }

    std::vector<AggregateRecord> out(checkpoints);
    std::vector<double> column(runs.size());
    for (std::size_t c = 0; c < checkpoints; ++c) {
        out[c].envs_seen = runs.front()[c].envs_seen;
        for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
            for (std::size_t r = 0; r < runs.size(); ++r) column[r] = metric_value(runs[r][c], m);
            out[c].metrics[m] = mean_and_stderr(column);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export

ExportFormat parse_export_format(std::string_view text) {
    if (text == "csv") return ExportFormat::Csv;
    if (text == "json") return ExportFormat::Json;
    throw std::invalid_argument("unknown export format '" + std::string(text) + "' (expected csv|json)");
}

std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return {buf, end};
}

std::string metrics_csv(std::span<const MetricsRecord> records) {
    std::string out = "envs_seen,zeta,pool_size,cum_steps,cum_tests,failures\n";
    for (const MetricsRecord& r : records) {
        out += std::to_string(r.envs_seen) + ',' + format_number(r.zeta) + ',' + std::to_string(r.pool_size) + ',' +
               std::to_string(r.cumulative_training_steps) + ',' + std::to_string(r.cumulative_tests) + ',' +
               std::to_string(r.failures) + '\n';
    }
    return out;
}

nlohmann::json metrics_json(std::span<const MetricsRecord> records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const MetricsRecord& r : records)
        arr.push_back({
            {"envs_seen", r.envs_seen},
            {"zeta", r.zeta},
            {"pool_size", r.pool_size},
            {"cumulative_training_steps", r.cumulative_training_steps},
            {"cumulative_tests", r.cumulative_tests},
            {"failures", r.failures},
        });
    return arr;
}

std::vector<MetricsRecord> metrics_from_json(const nlohmann::json& j) {
    std::vector<MetricsRecord> out;
    for (const auto& o : j) {
        MetricsRecord r;
        r.envs_seen = o.at("envs_seen").get<int>();
        r.zeta = o.at("zeta").get<double>();
        r.pool_size = o.at("pool_size").get<int>();
        r.cumulative_training_steps = o.at("cumulative_training_steps").get<std::int64_t>();
        r.cumulative_tests = o.at("cumulative_tests").get<std::int64_t>();
        r.failures = o.at("failures").get<int>();
        out.push_back(r);
    }
    return out;
}

std::string aggregate_csv(std::span<const AggregateRecord> records) {
    std::string out = "envs_seen";
    for (auto name : kMetricNames) {
        out += ',';
        out += name;
        out += "_mean,";
        out += name;
        out += "_stderr";
    }
    out += '\n';
    for (const AggregateRecord& r : records) {
        out += std::to_string(r.envs_seen);
        for (const MeanStderr& m : r.metrics) out += ',' + format_number(m.mean) + ',' + format_number(m.stderr_);
        out += '\n';
    }
    return out;
}

nlohmann::json aggregate_json(std::span<const AggregateRecord> records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const AggregateRecord& r : records) {
        nlohmann::json o = {{"envs_seen", r.envs_seen}};
        for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
            o[std::string(kMetricNames[m]) + "_mean"] = r.metrics[m].mean;
            o[std::string(kMetricNames[m]) + "_stderr"] = r.metrics[m].stderr_;
        }
        arr.push_back(std::move(o));
    }
    return arr;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw std::runtime_error(path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void export_metrics(std::span<const MetricsRecord> records, ExportFormat format, const std::filesystem::path& path) {
    write_text_file(path, format == ExportFormat::Csv ? metrics_csv(records) : metrics_json(records).dump(2) + '\n');
}

std::string audit_log_jsonl(const RunResult& result) {
    std::string out;
    for (const EnvOutcome& o : result.outcomes) {
        nlohmann::json e = {
            {"event", "env"},
            {"seed", o.level_seed},
            {"created_new", o.created_new},
            {"failed", o.failed},
            {"solved_by", o.solved_by ? nlohmann::json(*o.solved_by) : nlohmann::json(nullptr)},
            {"credit_reward", o.credit_reward},
            {"training_steps", o.training_steps_used},
            {"epochs", o.epochs_used},
            {"tests", o.tests_run},
            {"init", o.init_source ? nlohmann::json(to_string(*o.init_source)) : nlohmann::json(nullptr)},
            {"init_fell_back", o.init_fell_back},
            {"removed", o.removed},
        };
        out += e.dump() + '\n';
    }
    for (const CreditEvent& c : result.credits) {
        nlohmann::json e = {
            {"event", "credit"}, {"seed", c.level_seed}, {"agent", c.agent_id},
            {"reward", c.reward}, {"kind", to_string(c.kind)},
        };
        out += e.dump() + '\n';
    }
    return out;
}

AuditReport audit_run(const RunResult& result, double threshold) {
    AuditReport report;
    const std::set<std::uint64_t> eval(result.eval_seeds.begin(), result.eval_seeds.end());
    for (const EnvOutcome& o : result.outcomes) {
        if (eval.contains(o.level_seed)) report.held_out_violations += 1;
        if (o.failed) continue;
        const bool credited = std::any_of(result.credits.begin(), result.credits.end(), [&](const CreditEvent& c) {
            return c.level_seed == o.level_seed && c.reward >= threshold;
        });
        const bool covered = std::any_of(result.pool.agents.begin(), result.pool.agents.end(),
                                         [&](const Agent& a) { return a.solved.contains(o.level_seed); });
        if (!credited || !covered) report.credit_violations += 1;
    }
    for (const CreditEvent& c : result.credits)
        if (c.reward < threshold) report.credit_violations += 1;
    return report;
}

void write_run_outputs(const RunResult& result, const std::filesystem::path& dir) {
    write_text_file(dir / "metrics.csv", metrics_csv(result.records));
    write_text_file(dir / "metrics.json", metrics_json(result.records).dump(2) + '\n');
    write_text_file(dir / "audit.jsonl", audit_log_jsonl(result));
    save_pool(result.pool, dir / "pool");
}

std::string compare_csv(std::span<const StrategyAggregate> table) {
    if (table.empty()) throw std::invalid_argument("compare_csv needs at least one strategy");
    const std::size_t checkpoints = table.front().records.size();
    for (const auto& s : table)
        if (s.records.size() != checkpoints) throw std::invalid_argument("strategies have different checkpoints");

    std::string out = "envs_seen";
    for (const auto& s : table) {
        const std::string name(to_string(s.strategy));
        out += ',' + name + "_zeta," + name + "_pool_size," + name + "_cum_steps";
    }
    out += '\n';
    for (std::size_t c = 0; c < checkpoints; ++c) {
        out += std::to_string(table.front().records[c].envs_seen);
        for (const auto& s : table) {
            const auto& m = s.records[c].metrics;
            out += ',' + format_number(m[0].mean) + ',' + format_number(m[1].mean) + ',' + format_number(m[2].mean);
        }
        out += '\n';
    }
    return out;
}

std::string svg_line_chart(const std::string& title, const std::string& y_label, std::span<const ChartSeries> series) {
    constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = 0.0, y_max = -std::numeric_limits<double>::infinity();
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double e = i < s.err.size() ? s.err[i] : 0.0;
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i] - e);
            y_max = std::max(y_max, s.y[i] + e);
        }
    if (!std::isfinite(x_min)) x_min = 0, x_max = 1;
    if (!std::isfinite(y_max) || y_max <= y_min) y_max = y_min + 1.0;
    if (x_max <= x_min) x_max = x_min + 1.0;

    auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * (kW - kLeft - kRight); };
    auto py = [&](double y) { return kH - kBottom - (y - y_min) / (y_max - y_min) * (kH - kTop - kBottom); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" "
                      "font-size=\"12\">\n<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + title + "</text>\n";
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kH - kBottom) + "\" x2=\"" + num(kW - kRight) + "\" y2=\"" +
           num(kH - kBottom) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
           num(kH - kBottom) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num((kLeft + kW - kRight) / 2) + "\" y=\"" + num(kH - 12) +
           "\" text-anchor=\"middle\">environments seen</text>\n";
    svg += "<text x=\"16\" y=\"" + num((kTop + kH - kBottom) / 2) + "\" transform=\"rotate(-90 16 " +
           num((kTop + kH - kBottom) / 2) + ")\" text-anchor=\"middle\">" + y_label + "</text>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(kH - kBottom) + "\" text-anchor=\"end\">" +
           format_number(y_min) + "</text>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(kTop + 4) + "\" text-anchor=\"end\">" +
           format_number(y_max) + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const std::string color = kColors[k % std::size(kColors)];
        if (!s.err.empty() && s.err.size() == s.y.size()) {
            std::string band;
            for (std::size_t i = 0; i < s.x.size(); ++i) band += num(px(s.x[i])) + ',' + num(py(s.y[i] + s.err[i])) + ' ';
            for (std::size_t i = s.x.size(); i-- > 0;) band += num(px(s.x[i])) + ',' + num(py(s.y[i] - s.err[i])) + ' ';
            svg += "<polygon points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        }
        std::string line;
        for (std::size_t i = 0; i < s.x.size(); ++i) line += num(px(s.x[i])) + ',' + num(py(s.y[i])) + ' ';
        svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        const double ly = kTop + 18.0 * static_cast<double>(k);
        svg += "<rect x=\"" + num(kW - kRight + 12) + "\" y=\"" + num(ly) + "\" width=\"12\" height=\"12\" fill=\"" +
               color + "\"/><text x=\"" + num(kW - kRight + 30) + "\" y=\"" + num(ly + 10) + "\">" + s.name +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace ecopool
