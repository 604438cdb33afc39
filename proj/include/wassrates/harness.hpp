#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "wassrates/bayes.hpp"
#include "wassrates/measures.hpp"
#include "wassrates/parallel.hpp"
#include "wassrates/rates.hpp"
#include "wassrates/transport.hpp"

namespace wassrates {

// Error taxonomy mapped to process exit codes by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct HypothesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitHypothesis = 3;
constexpr int kExitNumeric = 4;

struct ExperimentConfig {
  nlohmann::json raw;
  std::string kind;
  std::size_t n_max = 10000;
  std::size_t replicas = 10;
  std::uint64_t seed = 0;
  std::string statistic = "both";  // sup | limsup | both

  static ExperimentConfig parse(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& file);
  // Model-hypothesis validation; throws HypothesisError naming the failed
  // condition.
  void check_hypotheses() const;
};

struct TrajectoryRow {
  std::size_t replica = 0;
  std::size_t n = 0;
  double b_n = 0.0;
  double distance = 0.0;
  double running_sup = 0.0;  // of b_n * distance, within the replica
};

struct TrajectorySummary {
  std::string statistic;
  double sup_stat_mean = 0.0;    // mean over replicas of sup_n (b_n d)^p
  double sup_stat_stderr = 0.0;
  double tail_max_worst = 0.0;   // worst replica tail max of b_n d
  std::size_t violations = 0;    // replicas whose tail max exceeds the bound
  double bound = 0.0;
  std::string bound_kind;
  std::size_t replicas = 0;
  std::size_t n_max = 0;

  nlohmann::json to_json() const;
};

struct TrajectoryReport {
  std::vector<TrajectoryRow> rows;
  TrajectorySummary summary;
  std::vector<BoundReport> bounds;
};

// Monte Carlo estimate of the expected supremum statistic, compared against
// the uniform bound. The truncation at n_max makes the estimate a lower bound
// of the untruncated expectation, so the comparison is one-sided.
TrajectoryReport estimate_sup_statistic(const ExperimentConfig& cfg);
// Tail maximum over [n_max/2, n_max] per replica against the limsup bound.
TrajectoryReport estimate_limsup_statistic(const ExperimentConfig& cfg);

// Shortest round-trip decimal rendering (CSV and reports are diffable).
std::string format_double(double v);

void write_trajectory_csv(const std::filesystem::path& file, const std::vector<TrajectoryRow>& rows);
void write_bayes_csv(const std::filesystem::path& file, const std::vector<BayesTrajRow>& rows);

// Full experiment: writes trajectories.csv, bounds.json and summary.json to
// out_dir; byte-identical for identical (config, seed).
int run_experiment(const std::filesystem::path& config_file, const std::filesystem::path& out_dir,
                   const nlohmann::json& overrides = {});

// Ledger replay of a serialized bound report (single object or array).
bool audit_file(const std::filesystem::path& report_file, std::string* detail = nullptr);

}  // namespace wassrates
