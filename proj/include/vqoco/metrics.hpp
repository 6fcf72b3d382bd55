#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vqoco/problem.hpp"
#include "vqoco/trajectory.hpp"

namespace vqoco {

/// Cumulative sum over s <= t of f_s(x_s) - f_s(x_s^*). Signed.
std::vector<double> dynamic_regret(const Trajectory& traj, std::span<const Vec> minimizers,
                                   std::span<const LossOracle> losses);

/// Same, from precomputed per-round comparator losses.
std::vector<double> dynamic_regret(const Trajectory& traj, std::span<const double> comparator_losses);

/// Running componentwise sums of g_t(x_t): result[k][t-1]. Raw, never clipped.
std::vector<std::vector<double>> violations(const Trajectory& traj);

/// Sum over consecutive pairs of ||x_t - x_{t-1}||.
double path_length(std::span<const Vec> points);

struct FunctionVariation {
  double value = 0.0;
  bool analytic = false;  // false means a sampled lower bound
};

/// Sum over t >= 2 of sup_x ||g_t(x) - g_{t-1}(x)||. Uses the instance's exact
/// per-round values when present, otherwise the sampled estimate on chi(t)
/// with stream seed ^ t.
FunctionVariation function_variation(const ProblemInstance& instance, int samples, std::uint64_t seed);

/// Single-threaded reference for the sampled path of function_variation.
FunctionVariation function_variation_serial(const ProblemInstance& instance, int samples, std::uint64_t seed);

struct GrowthFit {
  double slope = 0.0;
  double shift = 0.0;  // added to the series before the fit, 0 when already positive
};

/// Least-squares slope of log(series[t]) against log(t) on the 1-based
/// inclusive window [t_lo, t_hi].
GrowthFit growth_exponent(std::span<const double> series, int t_lo, int t_hi);

/// Default window [T/4, T].
std::pair<int, int> default_window(int horizon);

/// Comparator losses f_t(x_t^*) and the comparator's worst constraint value.
struct Comparator {
  std::vector<Vec> points;
  std::vector<double> losses;
  double max_violation = 0.0;
  bool exact = false;  // true when taken from the generator
};

Comparator compute_comparator(const ProblemInstance& instance);

struct MetricsReport {
  std::vector<double> regret_cum;
  std::vector<std::vector<double>> vio_cum;  // [k][t-1]
  std::vector<double> regret_avg;
  std::vector<std::vector<double>> vio_avg;
  double V_x = 0.0;
  FunctionVariation V_g;
  std::optional<GrowthFit> regret_exponent;  // fit of |regret_cum|; absent when zero on the window
  std::optional<GrowthFit> vio_exponent;     // fit of max_k positive-part vio_cum; absent when <= 0
  double comparator_max_violation = 0.0;
};

MetricsReport compute_metrics(const Trajectory& traj, const Comparator& comparator, const FunctionVariation& vg,
                              std::pair<int, int> window);

/// max_k vio_cum[k][t-1] for each t.
std::vector<double> max_violation_series(const MetricsReport& m);

}  // namespace vqoco
