#include "vqoco/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vqoco/subsolvers.hpp"

namespace vqoco {

std::vector<double> dynamic_regret(const Trajectory& traj, std::span<const double> comparator_losses) {
  require(comparator_losses.size() == traj.rounds.size(), "dynamic_regret: trajectory/comparator length mismatch");
  std::vector<double> out(traj.rounds.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < out.size(); ++t) {
    acc += traj.rounds[t].loss - comparator_losses[t];
    out[t] = acc;
  }
  return out;
}

std::vector<double> dynamic_regret(const Trajectory& traj, std::span<const Vec> minimizers,
                                   std::span<const LossOracle> losses) {
  require(minimizers.size() == traj.rounds.size() && losses.size() == traj.rounds.size(),
          "dynamic_regret: trajectory/minimizer/loss length mismatch");
  std::vector<double> comp(losses.size());
  for (std::size_t t = 0; t < comp.size(); ++t) comp[t] = losses[t].eval(minimizers[t]);
  return dynamic_regret(traj, comp);
}

std::vector<std::vector<double>> violations(const Trajectory& traj) {
  const std::size_t K = traj.num_constraints;
  std::vector<std::vector<double>> out(K, std::vector<double>(traj.rounds.size()));
  std::vector<double> acc(K, 0.0);
  for (std::size_t t = 0; t < traj.rounds.size(); ++t) {
    require(traj.rounds[t].g.size() == K, "violations: constraint vector length mismatch");
    for (std::size_t k = 0; k < K; ++k) {
      acc[k] += traj.rounds[t].g[k];
      out[k][t] = acc[k];
    }
  }
  return out;
}

double path_length(std::span<const Vec> points) {
  require(!points.empty(), "path_length: needs at least one point");
  double total = 0.0;
  for (std::size_t t = 1; t < points.size(); ++t) total += dist(points[t], points[t - 1]);
  return total;
}

namespace {

double round_deviation(const ProblemInstance& inst, int t, int samples, std::uint64_t seed) {
  return estimate_sup_deviation_serial(inst.constraints_at(t), inst.constraints_at(t - 1), inst.set_at(t), samples,
                                       seed ^ static_cast<std::uint64_t>(t));
}

}  // namespace

FunctionVariation function_variation_serial(const ProblemInstance& instance, int samples, std::uint64_t seed) {
  require(samples >= 1, "function_variation: samples must be >= 1");
  if (instance.sup_deviation) {
    double s = 0.0;
    for (int t = 2; t <= instance.horizon; ++t) s += (*instance.sup_deviation)[static_cast<std::size_t>(t - 1)];
    return {s, true};
  }
  double s = 0.0;
  for (int t = 2; t <= instance.horizon; ++t) s += round_deviation(instance, t, samples, seed);
  return {s, false};
}

FunctionVariation function_variation(const ProblemInstance& instance, int samples, std::uint64_t seed) {
  require(samples >= 1, "function_variation: samples must be >= 1");
  if (instance.sup_deviation) return function_variation_serial(instance, samples, seed);
  std::vector<double> per_round(static_cast<std::size_t>(instance.horizon), 0.0);
  const long long T = instance.horizon;
#pragma omp parallel for schedule(dynamic)
  for (long long t = 2; t <= T; ++t) per_round[t - 1] = round_deviation(instance, static_cast<int>(t), samples, seed);
  // Summed in round order so the result matches the serial reference bit for bit.
  double s = 0.0;
  for (double v : per_round) s += v;
  return {s, false};
}

GrowthFit growth_exponent(std::span<const double> series, int t_lo, int t_hi) {
  require(t_lo >= 1 && t_hi <= static_cast<int>(series.size()) && t_lo <= t_hi,
          "growth_exponent: window outside the series");
  require(t_hi - t_lo + 1 >= 10, "growth_exponent: window shorter than 10 points");
  double lo_val = series[static_cast<std::size_t>(t_lo - 1)];
  for (int t = t_lo; t <= t_hi; ++t) lo_val = std::min(lo_val, series[static_cast<std::size_t>(t - 1)]);
  GrowthFit fit;
  if (lo_val <= 0.0) fit.shift = std::max(0.0, -lo_val) + 1.0;
  const double n = t_hi - t_lo + 1;
  double sx = 0.0, sy = 0.0;
  for (int t = t_lo; t <= t_hi; ++t) {
    sx += std::log(static_cast<double>(t));
    sy += std::log(series[static_cast<std::size_t>(t - 1)] + fit.shift);
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0.0, sxx = 0.0;
  for (int t = t_lo; t <= t_hi; ++t) {
    const double dx = std::log(static_cast<double>(t)) - mx;
    sxy += dx * (std::log(series[static_cast<std::size_t>(t - 1)] + fit.shift) - my);
    sxx += dx * dx;
  }
  fit.slope = sxy / sxx;
  return fit;
}

std::pair<int, int> default_window(int horizon) { return {std::max(1, horizon / 4), horizon}; }

Comparator compute_comparator(const ProblemInstance& instance) {
  Comparator c;
  const auto T = static_cast<std::size_t>(instance.horizon);
  c.points.resize(T);
  c.losses.resize(T);
  std::vector<double> viol(T, 0.0);
  if (instance.minimizers) {
    c.exact = true;
    c.points = *instance.minimizers;
  } else {
    const long long n = instance.horizon;
#pragma omp parallel for schedule(dynamic)
    for (long long t = 1; t <= n; ++t) {
      const int r = static_cast<int>(t);
      c.points[t - 1] = per_slot_minimizer(instance.loss_at(r), instance.constraints_at(r), instance.set_at(r)).x;
    }
  }
  for (int t = 1; t <= instance.horizon; ++t) {
    const auto& x = c.points[static_cast<std::size_t>(t - 1)];
    c.losses[static_cast<std::size_t>(t - 1)] = instance.loss_at(t).eval(x);
    for (double v : instance.constraints_at(t).eval(x)) c.max_violation = std::max(c.max_violation, v);
  }
  return c;
}

MetricsReport compute_metrics(const Trajectory& traj, const Comparator& comparator, const FunctionVariation& vg,
                              std::pair<int, int> window) {
  MetricsReport m;
  m.regret_cum = dynamic_regret(traj, comparator.losses);
  m.vio_cum = violations(traj);
  const std::size_t T = m.regret_cum.size();
  m.regret_avg.resize(T);
  for (std::size_t t = 0; t < T; ++t) m.regret_avg[t] = m.regret_cum[t] / static_cast<double>(t + 1);
  m.vio_avg = m.vio_cum;
  for (auto& series : m.vio_avg)
    for (std::size_t t = 0; t < T; ++t) series[t] /= static_cast<double>(t + 1);
  m.V_x = comparator.points.empty() ? 0.0 : path_length(comparator.points);
  m.V_g = vg;
  m.comparator_max_violation = comparator.max_violation;

  const auto [lo, hi] = window;
  const bool window_ok = lo >= 1 && hi <= static_cast<int>(T) && hi - lo + 1 >= 10;
  if (window_ok) {
    std::vector<double> abs_regret(T);
    for (std::size_t t = 0; t < T; ++t) abs_regret[t] = std::abs(m.regret_cum[t]);
    std::vector<double> pos_vio = max_violation_series(m);
    for (auto& v : pos_vio) v = std::max(0.0, v);
    auto positive_somewhere = [&](const std::vector<double>& s) {
      for (int t = lo; t <= hi; ++t)
        if (s[static_cast<std::size_t>(t - 1)] > 0.0) return true;
      return false;
    };
    if (positive_somewhere(abs_regret)) m.regret_exponent = growth_exponent(abs_regret, lo, hi);
    if (positive_somewhere(pos_vio)) m.vio_exponent = growth_exponent(pos_vio, lo, hi);
  }
  return m;
}

std::vector<double> max_violation_series(const MetricsReport& m) {
  const std::size_t T = m.regret_cum.size();
  if (m.vio_cum.empty()) return std::vector<double>(T, 0.0);
  std::vector<double> out(m.vio_cum[0]);
  for (std::size_t k = 1; k < m.vio_cum.size(); ++k)
    for (std::size_t t = 0; t < T; ++t) out[t] = std::max(out[t], m.vio_cum[k][t]);
  return out;
}

}  // namespace vqoco
