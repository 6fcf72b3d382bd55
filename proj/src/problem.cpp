#include "vqoco/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vqoco {

namespace {

void check_box(const Vec& lower, const Vec& upper) {
  require(!lower.empty(), "feasible set: dimension must be >= 1");
  require(lower.size() == upper.size(), "feasible set: lower/upper length mismatch");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    require(std::isfinite(lower[i]) && std::isfinite(upper[i]), "feasible set: non-finite bound");
    require(lower[i] <= upper[i], "feasible set: empty box (lower > upper at coordinate " +
                                      std::to_string(i) + ")");
  }
}

Vec clamp_shift(std::span<const double> p, const CappedBox& s, double theta) {
  Vec x(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    x[i] = std::clamp(p[i] - theta * s.weights[i], s.lower[i], s.upper[i]);
  return x;
}

Vec project_capped(const CappedBox& s, std::span<const double> p) {
  Vec x = clamp_shift(p, s, 0.0);
  if (dot(s.weights, x) <= s.cap) return x;
  // h(theta) = w^T clamp(p - theta w) - cap is nonincreasing; find its root.
  double lo = 0.0;
  double hi = 1.0;
  while (dot(s.weights, clamp_shift(p, s, hi)) > s.cap) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("capped box projection: multiplier bracket diverged");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (dot(s.weights, clamp_shift(p, s, mid)) > s.cap)
      lo = mid;
    else
      hi = mid;
  }
  // Refine on the final linear piece, then keep whichever side is feasible.
  Vec xh = clamp_shift(p, s, hi);
  const double hl = dot(s.weights, clamp_shift(p, s, lo)) - s.cap;
  const double hh = dot(s.weights, xh) - s.cap;
  if (hl > hh) {
    const double theta = lo + (hi - lo) * hl / (hl - hh);
    Vec xr = clamp_shift(p, s, theta);
    if (dot(s.weights, xr) <= s.cap) return xr;
  }
  return xh;
}

}  // namespace

FeasibleSet FeasibleSet::box(Vec lower, Vec upper) {
  check_box(lower, upper);
  const auto n = lower.size();
  return FeasibleSet(Box{std::move(lower), std::move(upper)}, n);
}

FeasibleSet FeasibleSet::uniform_box(std::size_t dim, double lo, double hi) {
  return box(Vec(dim, lo), Vec(dim, hi));
}

FeasibleSet FeasibleSet::ball(Vec center, double radius) {
  require(!center.empty(), "feasible set: dimension must be >= 1");
  require(all_finite(center), "feasible set: non-finite ball center");
  require(radius > 0.0 && std::isfinite(radius), "feasible set: ball radius must be > 0");
  const auto n = center.size();
  return FeasibleSet(Ball{std::move(center), radius}, n);
}

FeasibleSet FeasibleSet::capped_box(Vec lower, Vec upper, Vec weights, double cap) {
  check_box(lower, upper);
  require(weights.size() == lower.size(), "feasible set: cap weights length mismatch");
  for (double w : weights) require(w >= 0.0 && std::isfinite(w), "feasible set: cap weights must be >= 0");
  require(dot(weights, lower) <= cap, "feasible set: cap not satisfiable at the lower corner");
  const auto n = lower.size();
  return FeasibleSet(CappedBox{std::move(lower), std::move(upper), std::move(weights), cap}, n);
}

Vec project(const FeasibleSet& set, std::span<const double> point) {
  require(point.size() == set.dim(), "project: dimension mismatch");
  require(all_finite(point), "project: non-finite point");
  return std::visit(
      [&](const auto& s) -> Vec {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box>) {
          Vec x(point.size());
          for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(point[i], s.lower[i], s.upper[i]);
          return x;
        } else if constexpr (std::is_same_v<S, Ball>) {
          const double d = dist(point, s.center);
          // Accept points within a few ulps of the sphere so projection is idempotent.
          if (d <= s.radius * (1.0 + 4.0 * std::numeric_limits<double>::epsilon()))
            return Vec(point.begin(), point.end());
          Vec x(point.size());
          for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = s.center[i] + s.radius * (point[i] - s.center[i]) / d;
          return x;
        } else {
          return project_capped(s, point);
        }
      },
      set.shape());
}

double diameter(const FeasibleSet& set) {
  return std::visit(
      [](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Ball>)
          return 2.0 * s.radius;
        else
          return dist(s.upper, s.lower);
      },
      set.shape());
}

bool contains(const FeasibleSet& set, std::span<const double> point, double tol) {
  if (point.size() != set.dim()) return false;
  return std::visit(
      [&](const auto& s) -> bool {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Ball>) {
          return dist(point, s.center) <= s.radius * (1.0 + 4.0 * std::numeric_limits<double>::epsilon()) + tol;
        } else {
          for (std::size_t i = 0; i < point.size(); ++i)
            if (point[i] < s.lower[i] - tol || point[i] > s.upper[i] + tol) return false;
          if constexpr (std::is_same_v<S, CappedBox>) return dot(s.weights, point) <= s.cap + tol;
          return true;
        }
      },
      set.shape());
}

Vec sample_uniform(const FeasibleSet& set, Rng& rng) {
  auto sample_box = [&](const Vec& lo, const Vec& hi) {
    Vec x(lo.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
    return x;
  };
  return std::visit(
      [&](const auto& s) -> Vec {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box>) {
          return sample_box(s.lower, s.upper);
        } else if constexpr (std::is_same_v<S, Ball>) {
          const auto n = s.center.size();
          Vec dir(n);
          double nrm = 0.0;
          while (nrm == 0.0) {
            for (auto& v : dir) v = rng.normal();
            nrm = norm(dir);
          }
          const double r = s.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
          Vec x(n);
          for (std::size_t i = 0; i < n; ++i) x[i] = s.center[i] + r * dir[i] / nrm;
          return x;
        } else {
          Vec x;
          for (int attempt = 0; attempt < 1000; ++attempt) {
            x = sample_box(s.lower, s.upper);
            if (dot(s.weights, x) <= s.cap) return x;
          }
          return project_capped(s, x);
        }
      },
      set.shape());
}

LossOracle LossOracle::zero(std::size_t dim) {
  return {[](std::span<const double>) { return 0.0; }, [dim](std::span<const double>) { return Vec(dim, 0.0); }};
}

LossOracle LossOracle::linear(Vec a, double c) {
  return {[a, c](std::span<const double> x) { return dot(a, x) + c; }, [a](std::span<const double>) { return a; }};
}

LossOracle LossOracle::tracking(Vec target, double weight) {
  return {[target, weight](std::span<const double> x) {
            const double d = dist(x, target);
            return weight * d * d;
          },
          [target, weight](std::span<const double> x) {
            Vec g(x.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * weight * (x[i] - target[i]);
            return g;
          }};
}

ConstraintOracle ConstraintOracle::zero(std::size_t count, std::size_t dim) {
  return {count, [count](std::span<const double>) { return Vec(count, 0.0); },
          [count, dim](std::span<const double>) { return Matrix(count, Vec(dim, 0.0)); }};
}

ConstraintOracle ConstraintOracle::affine(Matrix a, Vec b) {
  require(a.size() == b.size(), "affine constraint: row/offset count mismatch");
  const auto k = a.size();
  return {k,
          [a, b](std::span<const double> x) {
            Vec v(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) v[i] = dot(a[i], x) - b[i];
            return v;
          },
          [a](std::span<const double>) { return a; }};
}

void AssumptionConstants::validate() const {
  require(F > 0.0 && G > 0.0 && R >= 0.0 && beta > 0.0, "assumption constants must be positive");
  if (epsilon && vbar_g)
    require(*epsilon > *vbar_g, "assumption constants: Slater epsilon must exceed vbar_g");
}

const LossOracle& ProblemInstance::loss_at(int t) const {
  require(t >= 1 && t <= horizon, "round index out of range: " + std::to_string(t));
  return losses[static_cast<std::size_t>(t - 1)];
}

const ConstraintOracle& ProblemInstance::constraints_at(int t) const {
  require(t >= 1 && t <= horizon, "round index out of range: " + std::to_string(t));
  return constraints[static_cast<std::size_t>(t - 1)];
}

const FeasibleSet& ProblemInstance::set_at(int t) const {
  require(t >= 1 && t <= horizon, "round index out of range: " + std::to_string(t));
  return sets[static_cast<std::size_t>(t - 1)];
}

std::optional<Vec> ProblemInstance::minimizer_at(int t) const {
  require(t >= 1 && t <= horizon, "round index out of range: " + std::to_string(t));
  if (!minimizers) return std::nullopt;
  return (*minimizers)[static_cast<std::size_t>(t - 1)];
}

void ProblemInstance::validate() const {
  require(horizon >= 1, "instance horizon must be >= 1");
  const auto T = static_cast<std::size_t>(horizon);
  require(losses.size() == T && constraints.size() == T && sets.size() == T,
          "instance: oracle tables must have one entry per round");
  if (minimizers) require(minimizers->size() == T, "instance: minimizer table length mismatch");
  if (sup_deviation) require(sup_deviation->size() == T, "instance: deviation table length mismatch");
  constants.validate();
}

namespace {

AssumptionReport check_round(const ProblemInstance& inst, int t, int samples, std::uint64_t seed) {
  AssumptionReport r;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
  const auto& f = inst.loss_at(t);
  const auto& g = inst.constraints_at(t);
  const auto& set = inst.set_at(t);
  Vec prev;
  for (int s = 0; s < samples; ++s) {
    Vec x = sample_uniform(set, rng);
    r.max_abs_f = std::max(r.max_abs_f, std::abs(f.eval(x)));
    r.max_grad_f = std::max(r.max_grad_f, norm(f.grad(x)));
    const Vec gx = g.eval(x);
    r.max_g_norm = std::max(r.max_g_norm, norm(gx));
    for (const auto& row : g.jac(x)) r.max_grad_g = std::max(r.max_grad_g, norm(row));
    if (!prev.empty()) {
      const double dx = dist(x, prev);
      if (dx > 1e-12) r.max_lipschitz = std::max(r.max_lipschitz, dist(gx, g.eval(prev)) / dx);
    }
    prev = std::move(x);
  }
  r.rounds_checked = 1;
  return r;
}

std::vector<int> sampled_rounds(int horizon) {
  const int count = std::min(horizon, 64);
  std::vector<int> rounds;
  for (int i = 0; i < count; ++i)
    rounds.push_back(count == 1 ? 1 : 1 + static_cast<int>((static_cast<long long>(horizon - 1) * i) / (count - 1)));
  return rounds;
}

AssumptionReport merge(const ProblemInstance& inst, const std::vector<AssumptionReport>& parts) {
  AssumptionReport r;
  for (const auto& p : parts) {
    r.max_abs_f = std::max(r.max_abs_f, p.max_abs_f);
    r.max_g_norm = std::max(r.max_g_norm, p.max_g_norm);
    r.max_grad_f = std::max(r.max_grad_f, p.max_grad_f);
    r.max_grad_g = std::max(r.max_grad_g, p.max_grad_g);
    r.max_lipschitz = std::max(r.max_lipschitz, p.max_lipschitz);
    r.rounds_checked += p.rounds_checked;
  }
  const auto& c = inst.constants;
  const double slack = 1e-9;
  r.flag_F = r.max_abs_f > c.F * (1 + slack) || r.max_g_norm > c.F * (1 + slack);
  r.flag_G = r.max_grad_f > c.G * (1 + slack) || r.max_grad_g > c.G * (1 + slack);
  r.flag_beta = r.max_lipschitz > c.beta * (1 + slack) + slack;
  return r;
}

}  // namespace

AssumptionReport check_assumption_bounds_serial(const ProblemInstance& instance, int samples,
                                                std::uint64_t seed) {
  require(samples >= 1, "check_assumption_bounds: samples must be >= 1");
  const auto rounds = sampled_rounds(instance.horizon);
  std::vector<AssumptionReport> parts;
  parts.reserve(rounds.size());
  for (int t : rounds) parts.push_back(check_round(instance, t, samples, seed));
  return merge(instance, parts);
}

AssumptionReport check_assumption_bounds(const ProblemInstance& instance, int samples, std::uint64_t seed) {
  require(samples >= 1, "check_assumption_bounds: samples must be >= 1");
  const auto rounds = sampled_rounds(instance.horizon);
  std::vector<AssumptionReport> parts(rounds.size());
  const auto n = static_cast<long long>(rounds.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) parts[i] = check_round(instance, rounds[i], samples, seed);
  return merge(instance, parts);
}

}  // namespace vqoco
