#pragma once

// Experiment protocol: a stream of training levels fed to a pool, periodic
// evaluation on held-out levels, counters, multi-run aggregation and export.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecopool/ecosystem.hpp"

namespace ecopool {

/// How one held-out level's reward is extracted from the pool.
enum class ZetaMode { MaxOverPool, MeanOverPool };
std::string_view to_string(ZetaMode m);
ZetaMode parse_zeta_mode(std::string_view text);

/// Invalid configuration. `key()` is the dotted path of the offending entry.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& message)
        : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct ExperimentConfig {
    InitStrategy strategy = InitStrategy::Basic;
    int n_train_envs = 500;
    int eval_every = 50;
    int n_eval_envs = 20;
    std::uint64_t train_seed_base = 0;
    std::uint64_t eval_seed_base = 1'000'000'000;
    int n_runs = 5;
    std::uint64_t seed = 0;  // master seed for agent randomness
    double threshold = 0.8;
    int budget = 300;
    bool optimize_pool = true;
    ZetaMode zeta_mode = ZetaMode::MaxOverPool;
    LevelConfig level;
    PpoConfig ppo;
    std::string output_dir = "ecopool-out";

    /// Throws ConfigError.
    void validate() const;

    /// Run r trains on train_seed_base + r * n_train_envs + i.
    std::uint64_t train_seed(int run, int index) const;
    /// Every run evaluates on the same held-out levels eval_seed_base + j.
    std::uint64_t eval_seed(int index) const;
    EcosystemConfig ecosystem() const;
};

/// Strict parse: unknown keys and ill-typed values raise ConfigError. Missing
/// keys keep their defaults. The result is validated.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

struct MetricsRecord {
    int envs_seen = 0;
    double zeta = 0.0;
    int pool_size = 0;
    std::int64_t cumulative_training_steps = 0;
    std::int64_t cumulative_tests = 0;
    int failures = 0;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct ZetaResult {
    double zeta = 0.0;
    std::vector<double> per_level;
    int tests_run = 0;
};

/// Mean over eval levels of the pool's reward on each. Read-only on the pool.
/// An empty pool scores 0 on every level.
ZetaResult adaptability_index(const Pool& pool, std::span<const Level> eval_levels,
                              ZetaMode mode = ZetaMode::MaxOverPool);

struct RunResult {
    int run = 0;
    std::vector<MetricsRecord> records;
    std::vector<EnvOutcome> outcomes;
    std::vector<CreditEvent> credits;
    std::vector<std::uint64_t> eval_seeds;
    int dominance_violations = 0;  // checked after every training level
    Pool pool;
    std::string error;  // set when the run aborted; everything above is the partial result
};

/// Called after each training level with (run, levels seen so far, outcome).
using ProgressFn = std::function<void(int, int, const EnvOutcome&)>;

/// Runtime failures (e.g. divergence) stop the run and are reported in
/// RunResult::error with the records gathered so far.
RunResult run_experiment(const ExperimentConfig& cfg, int run, const ProgressFn& progress = {});

/// Runs cfg.n_runs repetitions on up to `jobs` threads; result order is by run.
std::vector<RunResult> run_experiments(const ExperimentConfig& cfg, int jobs, const ProgressFn& progress = {});

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline constexpr std::array<std::string_view, 5> kMetricNames = {"zeta", "pool_size", "cum_steps", "cum_tests",
                                                                 "failures"};
double metric_value(const MetricsRecord& r, std::size_t metric);

struct AggregateRecord {
    int envs_seen = 0;
    std::array<MeanStderr, kMetricNames.size()> metrics{};
};

MeanStderr mean_and_stderr(std::span<const double> values);

/// Throws std::invalid_argument when runs disagree on checkpoints.
std::vector<AggregateRecord> aggregate_runs(const std::vector<std::vector<MetricsRecord>>& runs);

enum class ExportFormat { Csv, Json };
ExportFormat parse_export_format(std::string_view text);

/// Shortest round-trip decimal form, '.' separator, no grouping.
std::string format_number(double v);

std::string metrics_csv(std::span<const MetricsRecord> records);
nlohmann::json metrics_json(std::span<const MetricsRecord> records);
std::vector<MetricsRecord> metrics_from_json(const nlohmann::json& j);
std::string aggregate_csv(std::span<const AggregateRecord> records);
nlohmann::json aggregate_json(std::span<const AggregateRecord> records);

/// Writes records to `path`; I/O errors name the path.
void export_metrics(std::span<const MetricsRecord> records, ExportFormat format, const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// One JSON object per line: an "env" event per training level and a
/// "credit" event per solved-set insertion.
std::string audit_log_jsonl(const RunResult& result);

struct AuditReport {
    int held_out_violations = 0;  // eval seed used for training
    int credit_violations = 0;    // non-failed level without a passing credit or covering agent
};
AuditReport audit_run(const RunResult& result, double threshold);

/// Writes metrics.csv, metrics.json, audit.jsonl and pool/ under `dir`.
void write_run_outputs(const RunResult& result, const std::filesystem::path& dir);

struct StrategyAggregate {
    InitStrategy strategy;
    std::vector<AggregateRecord> records;
};
/// envs_seen, then {strategy}_zeta, {strategy}_pool_size, {strategy}_cum_steps per strategy (means).
std::string compare_csv(std::span<const StrategyAggregate> table);

struct ChartSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;  // optional band half-width
};
/// Minimal SVG line chart with optional error bands.
std::string svg_line_chart(const std::string& title, const std::string& y_label, std::span<const ChartSeries> series);

}  // namespace ecopool
