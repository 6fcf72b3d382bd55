#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqoco/algorithms.hpp"
#include "vqoco/environments.hpp"
#include "vqoco/metrics.hpp"

namespace vqoco {

enum class EnvironmentType { Orr, Slater, Network, JobSched };

/// Environment block. Only the member matching `type` is used; horizon and
/// seed inside it are overwritten per tuple.
struct EnvironmentSpec {
  EnvironmentType type = EnvironmentType::Orr;
  OrrConfig orr;
  SlaterConfig slater;
  NetworkConfig network;
  JobSchedConfig jobsched;

  std::string type_name() const;
};

/// One configured algorithm with optional overrides.
struct AlgorithmSpec {
  std::string name;
  std::optional<double> eta;  // saddle presets only
  std::optional<double> mu;   // saddle presets only
  double slater_a = 0.5;      // slater only
};

/// Names accepted in the algorithms list.
const std::vector<std::string>& algorithm_names();

struct ExperimentConfig {
  EnvironmentSpec environment;
  std::vector<AlgorithmSpec> algorithms;
  std::vector<int> horizons;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "results";
  int vg_samples = 64;
  double window_lo = 0.25;  // fit window as fractions of T
  double window_hi = 1.0;
  MinimizerSource minimizers = MinimizerSource::Exact;
  SolverConfig solver;
  bool plot_script = false;
};

struct ConfigIssue {
  int line = 0;  // 0 when the problem is not tied to one line
  std::string message;
};

/// Thrown by parse_config with every problem found.
class ConfigParseError : public ConfigError {
 public:
  explicit ConfigParseError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& cfg);

/// The instance of one (environment, horizon, seed) family.
ProblemInstance build_instance(const EnvironmentSpec& env, int horizon, std::uint64_t seed);

/// 64-bit seeds: instances use mix(seed, T), tuples mix(seed, T, index + 1).
std::uint64_t instance_seed(std::uint64_t seed, int horizon);
std::uint64_t tuple_seed(std::uint64_t seed, int horizon, std::size_t algorithm_index);

struct TupleResult {
  std::string environment;
  std::string algorithm;
  std::size_t algorithm_index = 0;
  int horizon = 0;
  std::uint64_t seed = 0;       // configured seed
  std::uint64_t run_seed = 0;   // tuple_seed(...)
  bool ok = false;
  std::string error;
  Trajectory trajectory;
  MetricsReport metrics;
  std::string minimizer_source;
};

struct RunOptions {
  int jobs = 0;        // threads for tuples; 0 keeps the OpenMP default
  std::string filter;  // run only this algorithm when non-empty
};

/// Runs algorithm x horizon x seed. Results come back in (horizon, seed,
/// algorithm) order whatever the thread count. Failures are caught per tuple.
std::vector<TupleResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Trajectory header for K constraints.
std::vector<std::string> trajectory_header(std::size_t num_constraints);
std::vector<std::string> summary_header();

/// %.17g
std::string format_double(double v);

/// Writes one trajectory CSV per successful tuple plus summary.csv (and
/// plot.py when asked). Returns the written paths in write order.
std::vector<std::filesystem::path> write_csv(std::span<const TupleResult> results, const std::filesystem::path& dir,
                                             bool plot_script = false);

/// One summary.csv row in typed form.
struct SummaryRow {
  std::string environment;
  std::string algorithm;
  int horizon = 0;
  std::uint64_t seed = 0;
  std::string status;
  double regret_avg = 0.0;     // regret(T)/T
  double vio_max_avg = 0.0;    // max_k vio_k(T)/T
  std::optional<double> regret_exponent;
  std::optional<double> vio_exponent;
};

SummaryRow summarize(const TupleResult& r);
std::vector<SummaryRow> read_summary(const std::filesystem::path& path);

/// Per (algorithm, horizon): mean [min, max] of regret(T)/T and
/// max_k vio_k(T)/T over seeds, mean exponents ("n/a" when none). Sorted by
/// mean regret, ties by algorithm name. Failed rows are counted, not averaged.
std::string compare_table(std::span<const SummaryRow> rows);

}  // namespace vqoco
