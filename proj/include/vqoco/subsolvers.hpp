#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "vqoco/problem.hpp"

namespace vqoco {

enum class StepRule { Fixed, Backtracking };

struct SolverConfig {
  int max_iters = 500;
  double tol = 1e-8;  // projected-gradient fixed-point residual
  StepRule step_rule = StepRule::Backtracking;
  double step = 1.0;  // fixed step, or the initial trial step for backtracking

  void validate() const;
};

/// The primal-update problem
///   min_{x in set}  loss_grad^T (x - anchor) + gamma * dual_weight^T g(x) + alpha ||x - anchor||^2.
/// `constraints` and `set` are non-owning and must outlive the spec.
struct SubproblemSpec {
  Vec anchor;
  Vec loss_grad;
  Vec dual_weight;
  double gamma = 0.0;
  double alpha = 1.0;
  const ConstraintOracle* constraints = nullptr;
  const FeasibleSet* set = nullptr;

  void validate() const;
  double objective(std::span<const double> x) const;
  Vec gradient(std::span<const double> x) const;
};

struct SubproblemResult {
  Vec x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient with backtracking, started at the anchor. The returned
/// point is the output of a projection so it lies in the set exactly.
SubproblemResult solve_primal_subproblem(const SubproblemSpec& spec, const SolverConfig& cfg = {});

/// ||x - P(x - grad obj(x))||, the optimality certificate for the subproblem.
double subproblem_residual(const SubproblemSpec& spec, std::span<const double> candidate);

struct MinimizerResult {
  Vec x;
  double value = 0.0;
  double max_violation = 0.0;  // max_k g_k(x), clipped below at 0
  bool feasible = false;       // max_violation <= 1e-6
  int outer_iterations = 0;
};

/// Per-slot minimizer argmin { f(x) : x in set, g(x) <= 0 }. Augmented
/// Lagrangian on a penalty-weight ladder 1, 10, ..., 1e6; each inner problem is
/// solved by accelerated projected gradient from the projection of the origin.
/// `cfg.max_iters` caps the inner iterations per multiplier update.
MinimizerResult per_slot_minimizer(const LossOracle& loss, const ConstraintOracle& constraints,
                                   const FeasibleSet& set, const SolverConfig& cfg = {.max_iters = 20000, .tol = 1e-10});

/// max over `samples` uniform points of ||g_a(x) - g_b(x)||. Point i is drawn
/// from a stream keyed on (seed, i) so larger sample counts extend smaller ones.
double estimate_sup_deviation(const ConstraintOracle& g_a, const ConstraintOracle& g_b, const FeasibleSet& set,
                              int samples, std::uint64_t seed);

/// Single-threaded reference for estimate_sup_deviation.
double estimate_sup_deviation_serial(const ConstraintOracle& g_a, const ConstraintOracle& g_b,
                                     const FeasibleSet& set, int samples, std::uint64_t seed);

/// Smooth objective for the generic projected-gradient kernel.
struct SmoothObjective {
  std::function<double(std::span<const double>)> value;
  std::function<Vec(std::span<const double>)> gradient;
};

struct ProjectedGradientResult {
  Vec x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient (optionally FISTA-accelerated with adaptive restart)
/// with Armijo-type backtracking on the quadratic upper model.
ProjectedGradientResult projected_gradient(const SmoothObjective& obj, const FeasibleSet& set, Vec x0,
                                           const SolverConfig& cfg, bool accelerate);

}  // namespace vqoco
