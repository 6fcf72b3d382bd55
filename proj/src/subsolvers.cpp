#include "vqoco/subsolvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace vqoco {

void SolverConfig::validate() const {
  require(max_iters >= 1, "solver: max_iters must be >= 1");
  require(tol > 0.0, "solver: tol must be > 0");
  require(step > 0.0, "solver: step must be > 0");
}

void SubproblemSpec::validate() const {
  require(constraints != nullptr && set != nullptr, "subproblem: constraints and set are required");
  require(alpha > 0.0, "subproblem: alpha must be > 0");
  require(gamma >= 0.0, "subproblem: gamma must be >= 0");
  require(anchor.size() == set->dim() && loss_grad.size() == set->dim(), "subproblem: dimension mismatch");
  require(dual_weight.size() == constraints->count, "subproblem: dual weight length must equal K");
  for (double w : dual_weight) require(w >= 0.0, "subproblem: dual weight must be >= 0");
}

namespace {

bool constraint_term_active(const SubproblemSpec& s) {
  if (s.gamma == 0.0) return false;
  return std::any_of(s.dual_weight.begin(), s.dual_weight.end(), [](double w) { return w != 0.0; });
}

std::string describe(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

double fixed_point_residual(const FeasibleSet& set, std::span<const double> x, std::span<const double> g) {
  Vec y(x.begin(), x.end());
  axpy(-1.0, g, y);
  return dist(x, project(set, y));
}

}  // namespace

double SubproblemSpec::objective(std::span<const double> x) const {
  double v = dot(loss_grad, x) - dot(loss_grad, anchor);
  const double d = dist(x, anchor);
  v += alpha * d * d;
  if (constraint_term_active(*this)) v += gamma * dot(dual_weight, constraints->eval(x));
  return v;
}

Vec SubproblemSpec::gradient(std::span<const double> x) const {
  Vec g(loss_grad);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * alpha * (x[i] - anchor[i]);
  if (constraint_term_active(*this)) {
    const Matrix jac = constraints->jac(x);
    for (std::size_t k = 0; k < jac.size(); ++k)
      if (dual_weight[k] != 0.0) axpy(gamma * dual_weight[k], jac[k], g);
  }
  return g;
}

ProjectedGradientResult projected_gradient(const SmoothObjective& obj, const FeasibleSet& set, Vec x0,
                                           const SolverConfig& cfg, bool accelerate) {
  cfg.validate();
  Vec x = project(set, x0);
  const double fx = obj.value(x);
  Vec gx = obj.gradient(x);
  auto check = [&](const Vec& pt, double f, const Vec& g) {
    if (!std::isfinite(f) || !all_finite(g))
      throw NumericError("projected gradient: non-finite objective or gradient at iterate " + describe(pt));
  };
  check(x, fx, gx);

  ProjectedGradientResult out;
  double step = cfg.step;
  Vec x_prev = x;
  double momentum_t = 1.0;
  int it = 0;
  double residual = fixed_point_residual(set, x, gx);
  for (; it < cfg.max_iters && residual > cfg.tol; ++it) {
    // Extrapolated point (plain projected gradient when not accelerating).
    Vec y = x;
    Vec gy = gx;
    double next_t = 1.0;
    if (accelerate && it > 0) {
      next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
      const double beta = (momentum_t - 1.0) / next_t;
      if (beta > 0.0) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + beta * (x[i] - x_prev[i]);
        y = project(set, y);
        gy = obj.gradient(y);
        check(y, 0.0, gy);
      }
    }

    Vec xn, gn;
    if (cfg.step_rule == StepRule::Fixed) {
      xn = y;
      axpy(-step, gy, xn);
      xn = project(set, xn);
      gn = obj.gradient(xn);
    } else {
      // For convex f, f(xn) <= f(y) + gy.d + (gn - gy).d, so the test below
      // certifies the quadratic upper model without subtracting nearly equal
      // function values (which stalls progress around sqrt(machine eps)).
      double s = std::min(cfg.step, 2.0 * step);
      for (;;) {
        xn = y;
        axpy(-s, gy, xn);
        xn = project(set, xn);
        gn = obj.gradient(xn);
        const Vec d = sub(xn, y);
        const double dd = dot(d, d);
        if (dd == 0.0 || dot(sub(gn, gy), d) <= dd / (2.0 * s) || s < 1e-30) break;
        s *= 0.5;
      }
      step = s;
    }
    const double fn = obj.value(xn);
    check(xn, fn, gn);

    // Gradient-based adaptive restart: drop momentum once the step points
    // against the previous motion.
    bool restart = false;
    if (accelerate) {
      double align = 0.0;
      for (std::size_t i = 0; i < xn.size(); ++i) align += (y[i] - xn[i]) * (xn[i] - x[i]);
      restart = align > 0.0;
    }
    x_prev = std::move(x);
    x = std::move(xn);
    gx = std::move(gn);
    momentum_t = accelerate && !restart ? next_t : 1.0;
    residual = fixed_point_residual(set, x, gx);
  }
  out.x = std::move(x);
  out.residual = residual;
  out.iterations = it;
  out.converged = residual <= cfg.tol;
  return out;
}

SubproblemResult solve_primal_subproblem(const SubproblemSpec& spec, const SolverConfig& cfg) {
  spec.validate();
  SmoothObjective obj{[&spec](std::span<const double> x) { return spec.objective(x); },
                      [&spec](std::span<const double> x) { return spec.gradient(x); }};
  auto r = projected_gradient(obj, *spec.set, spec.anchor, cfg, false);
  return {std::move(r.x), r.residual, r.iterations, r.converged};
}

double subproblem_residual(const SubproblemSpec& spec, std::span<const double> candidate) {
  spec.validate();
  return fixed_point_residual(*spec.set, candidate, spec.gradient(candidate));
}

MinimizerResult per_slot_minimizer(const LossOracle& loss, const ConstraintOracle& constraints,
                                   const FeasibleSet& set, const SolverConfig& cfg) {
  cfg.validate();
  const std::size_t K = constraints.count;
  Vec mu(K, 0.0);
  double rho = 1.0;
  constexpr double kMaxRho = 1e6;
  constexpr double kKktTol = 1e-9;

  SmoothObjective lagrangian{
      [&](std::span<const double> x) {
        double v = loss.eval(x);
        if (K == 0) return v;
        const Vec g = constraints.eval(x);
        for (std::size_t k = 0; k < K; ++k) {
          const double s = std::max(0.0, mu[k] + rho * g[k]);
          v += (s * s - mu[k] * mu[k]) / (2.0 * rho);
        }
        return v;
      },
      [&](std::span<const double> x) {
        Vec grad = loss.grad(x);
        if (K == 0) return grad;
        const Vec g = constraints.eval(x);
        const Matrix jac = constraints.jac(x);
        for (std::size_t k = 0; k < K; ++k) {
          const double s = std::max(0.0, mu[k] + rho * g[k]);
          if (s > 0.0) axpy(s, jac[k], grad);
        }
        return grad;
      }};

  Vec x = project(set, Vec(set.dim(), 0.0));
  MinimizerResult out;
  double prev_violation = std::numeric_limits<double>::infinity();
  int outer = 0, stalled = 0;
  for (; outer < 200; ++outer) {
    auto r = projected_gradient(lagrangian, set, x, cfg, true);
    x = std::move(r.x);
    if (K == 0) {
      ++outer;
      break;
    }
    const Vec g = constraints.eval(x);
    double violation = 0.0;
    double kkt = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      violation = std::max(violation, g[k]);
      kkt = std::max(kkt, std::abs(std::min(-g[k], mu[k] / rho)));
      mu[k] = std::max(0.0, mu[k] + rho * g[k]);
    }
    if (kkt <= kKktTol && r.converged) {
      ++outer;
      break;
    }
    // At the penalty cap with no progress the slot is most likely infeasible.
    if (rho == kMaxRho && violation > 0.9 * prev_violation) {
      if (++stalled >= 3) {
        ++outer;
        break;
      }
    } else {
      stalled = 0;
    }
    if (violation > 0.25 * prev_violation) rho = std::min(rho * 10.0, kMaxRho);
    prev_violation = violation;
  }
  out.x = std::move(x);
  out.value = loss.eval(out.x);
  out.outer_iterations = outer;
  if (K > 0) {
    const Vec g = constraints.eval(out.x);
    for (double v : g) out.max_violation = std::max(out.max_violation, v);
  }
  out.feasible = out.max_violation <= 1e-6;
  return out;
}

namespace {

double deviation_at(const ConstraintOracle& g_a, const ConstraintOracle& g_b, const FeasibleSet& set,
                    std::uint64_t seed, long long i) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
  const Vec x = sample_uniform(set, rng);
  return dist(g_a.eval(x), g_b.eval(x));
}

}  // namespace

double estimate_sup_deviation_serial(const ConstraintOracle& g_a, const ConstraintOracle& g_b,
                                     const FeasibleSet& set, int samples, std::uint64_t seed) {
  require(samples >= 1, "estimate_sup_deviation: samples must be >= 1");
  require(g_a.count == g_b.count, "estimate_sup_deviation: constraint count mismatch");
  double best = 0.0;
  for (long long i = 0; i < samples; ++i) best = std::max(best, deviation_at(g_a, g_b, set, seed, i));
  return best;
}

double estimate_sup_deviation(const ConstraintOracle& g_a, const ConstraintOracle& g_b, const FeasibleSet& set,
                              int samples, std::uint64_t seed) {
  require(samples >= 1, "estimate_sup_deviation: samples must be >= 1");
  require(g_a.count == g_b.count, "estimate_sup_deviation: constraint count mismatch");
  double best = 0.0;
#pragma omp parallel for reduction(max : best) schedule(static)
  for (long long i = 0; i < samples; ++i) best = std::max(best, deviation_at(g_a, g_b, set, seed, i));
  return best;
}

}  // namespace vqoco
