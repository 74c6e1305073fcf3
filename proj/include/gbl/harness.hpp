#pragma once

// Experiment orchestration: configuration, paired repetitions, metrics and
// CSV persistence.

#include "gbl/envs.hpp"
#include "gbl/policies.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbl {

/// Configuration problems; `key` names the offending entry (section.key) and
/// `line` is set for syntax errors.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string &msg, std::string key = {}, std::size_t line = 0)
        : std::runtime_error(msg), key_(std::move(key)), line_(line) {}
    const std::string &key() const { return key_; }
    std::size_t line() const { return line_; }

  private:
    std::string key_;
    std::size_t line_;
};

struct InstanceSpec {
    /// "synthetic" or "matrix"
    std::string source = "synthetic";
    std::size_t d1 = 8;
    std::size_t d2 = 8;
    std::size_t rank = 2;
    std::size_t n_actions = 100;
    /// "gaussian" or "outer" (outer uses n_rows × n_cols products)
    std::string action_model = "gaussian";
    std::size_t n_rows = 10;
    std::size_t n_cols = 10;
    /// Row/column graphs shaping Θ*: "none" or "er" (with theta_graph_p).
    std::string theta_graphs = "none";
    double theta_graph_p = 0.5;
    double theta_eps = 1e-6;
    /// Reward matrix for source = matrix.
    std::filesystem::path matrix;
    bool skip_header = false;
    bool impute_missing = false;
};

struct GraphSpec {
    /// "er" | "ba" | "knn" | "none"
    std::string model = "er";
    double p = 0.5;
    std::size_t m = 2;
    std::size_t k = 5;
};

struct ExperimentConfig {
    InstanceSpec instance;
    GraphSpec graph;
    std::string family = "linear";
    double omega = 0.01;
    std::vector<PolicyKind> policies{PolicyKind::gg_estt, PolicyKind::nograph, PolicyKind::gg_oful,
                                     PolicyKind::ucb_glm};
    /// Per-policy settings; horizon, rank and hit percentile are filled from
    /// the experiment level.
    std::map<PolicyKind, PolicyConfig> policy;
    std::size_t horizon = 2000;
    std::size_t reps = 5;
    std::uint64_t base_seed = 1;
    std::filesystem::path out_dir = "results";
    double hit_percentile = 5.0;
    /// 0 = hardware concurrency; GBL_WORKERS overrides.
    std::size_t workers = 0;

    /// Throws ConfigError on violated invariants.
    void validate() const;
    /// Effective per-policy configuration.
    PolicyConfig policy_config(PolicyKind kind) const;
};

/// Flat INI text: [experiment], [instance], [graph], [family], [policy]
/// (shared) and [policy.<name>] sections. Unknown sections/keys and bad
/// values raise ConfigError naming the key.
ExperimentConfig parse_config_text(const std::string &text);
ExperimentConfig load_config(const std::filesystem::path &path);

/// Named per-rep streams derived from baseSeed + rep.
struct RepSeeds {
    std::uint64_t rep_seed = 0;
    std::uint64_t instance = 0;
    std::uint64_t graph = 0;
    RunSeeds run;
};
RepSeeds rep_seeds(std::uint64_t base_seed, std::size_t rep);

/// Builds the rep's instance (fresh draws for synthetic sources).
BanditInstance build_instance(const ExperimentConfig &cfg, const RepSeeds &seeds);

struct RawRow {
    std::string policy;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    std::size_t t = 0;
    std::size_t action = 0;
    double reward = 0.0;
    double instant_regret = 0.0;
    double cum_regret = 0.0;
    bool hit = false;

    friend bool operator==(const RawRow &, const RawRow &) = default;
};

struct AggregateRow {
    std::string policy;
    std::size_t t = 0;
    double mean_cum_regret = 0.0;
    double std_cum_regret = 0.0;
    double mean_hit_rate = 0.0;

    friend bool operator==(const AggregateRow &, const AggregateRow &) = default;
};

/// HitRate(t) = (1/t) Σ_{i≤t} 1[chosen_i ∈ optimal set].
std::vector<double> hit_rate(const std::vector<StepRecord> &records, const std::vector<std::size_t> &optimal_set);
std::vector<double> cumulative_regret(const std::vector<StepRecord> &records);

struct PolicySeries {
    std::string policy;
    /// Complete reps only, each indexed by t − 1.
    std::vector<std::vector<double>> cum_regret;
    std::vector<std::vector<double>> hit_rate;
    std::vector<std::size_t> reps;
    std::vector<double> mean_cum_regret;
    /// Sample standard deviation (0 for a single rep).
    std::vector<double> std_cum_regret;
    std::vector<double> mean_hit_rate;
};

struct MetricSeries {
    std::vector<PolicySeries> policies;
    const PolicySeries &at(const std::string &policy) const;
    std::vector<AggregateRow> aggregate_rows() const;
};

struct ExperimentResult {
    MetricSeries series;
    std::vector<RawRow> raw;
    std::vector<std::string> warnings;
    /// Per rep, per policy run metadata (in config policy order).
    std::vector<std::vector<RunResult>> runs;
};

/// Fills mean/std from the per-rep arrays.
void aggregate(PolicySeries &s);

std::size_t effective_workers(std::size_t configured);

ExperimentResult run_experiment(const ExperimentConfig &cfg);

inline const char *kRawHeader = "policy,rep,seed,t,action,reward,instant_regret,cum_regret,hit";
inline const char *kAggregateHeader = "policy,t,mean_cum_regret,std_cum_regret,mean_hit_rate";

/// 10 significant digits.
std::string format_number(double v);

/// Writes raw.csv and aggregate.csv into `dir` (created if needed), each via
/// temp file + rename.
void write_results(const MetricSeries &series, const std::vector<RawRow> &raw, const std::filesystem::path &dir);
void write_aggregate(const std::vector<AggregateRow> &rows, const std::filesystem::path &file);

struct StoredResults {
    std::vector<RawRow> raw;
    std::vector<AggregateRow> aggregate;
};
StoredResults read_results(const std::filesystem::path &dir);

/// Runs the experiment once per value of graph_p (ER) or graph_m (BA);
/// writes <out>/<param>_<value>/{raw,aggregate}.csv and returns the final
/// mean cumulative regret per policy per value.
struct SweepPoint {
    std::string value;
    ExperimentResult result;
};
std::vector<SweepPoint> run_sweep(const ExperimentConfig &cfg, const std::string &param,
                                  const std::vector<std::string> &values, bool write);

} // namespace gbl
