#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vqoco/linalg.hpp"
#include "vqoco/rng.hpp"

namespace vqoco {

struct Box {
  Vec lower;
  Vec upper;
};

struct Ball {
  Vec center;
  double radius = 1.0;
};

/// Box intersected with the halfspace {x : weights^T x <= cap}. Weights are
/// nonnegative so the lower corner minimizes the cap expression.
struct CappedBox {
  Vec lower;
  Vec upper;
  Vec weights;
  double cap = 0.0;
};

/// A closed, convex, compact feasible set. Construction validates
/// nonemptiness; every instance is immutable afterwards.
class FeasibleSet {
 public:
  using Shape = std::variant<Box, Ball, CappedBox>;

  static FeasibleSet box(Vec lower, Vec upper);
  static FeasibleSet uniform_box(std::size_t dim, double lo, double hi);
  static FeasibleSet ball(Vec center, double radius);
  static FeasibleSet capped_box(Vec lower, Vec upper, Vec weights, double cap);

  std::size_t dim() const { return dim_; }
  const Shape& shape() const { return shape_; }

 private:
  FeasibleSet(Shape s, std::size_t dim) : shape_(std::move(s)), dim_(dim) {}
  Shape shape_;
  std::size_t dim_;
};

/// Euclidean projection. Exactly idempotent; the result lies in the set.
Vec project(const FeasibleSet& set, std::span<const double> point);

/// Diameter in the Euclidean norm. For CappedBox this is the enclosing box
/// diameter, an upper bound that is tight whenever the cap admits the far corner.
double diameter(const FeasibleSet& set);

bool contains(const FeasibleSet& set, std::span<const double> point, double tol = 1e-12);

/// One uniform draw from the set. CappedBox uses rejection from the box and
/// falls back to projecting the last draw after 1000 rejections.
Vec sample_uniform(const FeasibleSet& set, Rng& rng);

/// f_t with its analytic gradient.
struct LossOracle {
  std::function<double(std::span<const double>)> value;
  std::function<Vec(std::span<const double>)> gradient;

  double eval(std::span<const double> x) const { return value(x); }
  Vec grad(std::span<const double> x) const { return gradient(x); }

  static LossOracle zero(std::size_t dim);
  /// a^T x + c
  static LossOracle linear(Vec a, double c = 0.0);
  /// weight * ||x - target||^2
  static LossOracle tracking(Vec target, double weight = 1.0);
};

/// g_t : R^n -> R^K with its Jacobian (row k is the gradient of component k).
struct ConstraintOracle {
  std::size_t count = 0;
  std::function<Vec(std::span<const double>)> value;
  std::function<Matrix(std::span<const double>)> jacobian;

  Vec eval(std::span<const double> x) const { return value(x); }
  Matrix jac(std::span<const double> x) const { return jacobian(x); }

  static ConstraintOracle zero(std::size_t count, std::size_t dim);
  /// A x - b, one row per constraint.
  static ConstraintOracle affine(Matrix a, Vec b);
};

struct AssumptionConstants {
  double F = 1.0;     // bound on |f_t| and ||g_t|| over the set
  double G = 1.0;     // bound on gradient norms
  double R = 1.0;     // set diameter
  double beta = 1.0;  // Lipschitz constant of g_t
  std::optional<double> epsilon;  // Slater constant
  std::optional<double> vbar_g;   // max per-round constraint variation

  /// beta = K * G, the default when no tighter value is known.
  static double default_beta(std::size_t num_constraints, double G) {
    return static_cast<double>(num_constraints) * G;
  }
  void validate() const;
};

/// Horizon-indexed oracles. Round indices are 1-based: valid t is [1, horizon].
struct ProblemInstance {
  std::string name;
  std::size_t dim = 0;
  std::size_t num_constraints = 0;
  int horizon = 0;
  std::vector<LossOracle> losses;
  std::vector<ConstraintOracle> constraints;
  std::vector<FeasibleSet> sets;
  AssumptionConstants constants;
  /// Ground-truth per-slot minimizers when the generator knows them.
  std::optional<std::vector<Vec>> minimizers;
  /// Exact sup_x ||g_t(x) - g_{t-1}(x)|| per round (index t-1; entry 0 is 0).
  std::optional<std::vector<double>> sup_deviation;
  /// Generator defaults and derived values worth recording in run metadata.
  std::vector<std::pair<std::string, double>> metadata;
  /// Raw generator coefficients per round (index t-1), named, for snapshots.
  std::vector<std::vector<std::pair<std::string, Vec>>> coefficients;

  const LossOracle& loss_at(int t) const;
  const ConstraintOracle& constraints_at(int t) const;
  const FeasibleSet& set_at(int t) const;
  std::optional<Vec> minimizer_at(int t) const;
  void validate() const;
};

struct AssumptionReport {
  double max_abs_f = 0.0;
  double max_g_norm = 0.0;
  double max_grad_f = 0.0;
  double max_grad_g = 0.0;     // largest Jacobian row norm
  double max_lipschitz = 0.0;  // largest observed ||g(x)-g(y)|| / ||x-y||
  int rounds_checked = 0;
  bool flag_F = false;
  bool flag_G = false;
  bool flag_beta = false;

  bool ok() const { return !flag_F && !flag_G && !flag_beta; }
};

/// Samples up to 64 evenly spaced rounds, `samples` points each, and reports
/// observed maxima against the declared F, G and beta. Violations are flagged,
/// never thrown.
AssumptionReport check_assumption_bounds(const ProblemInstance& instance, int samples,
                                         std::uint64_t seed);

/// Single-threaded reference for check_assumption_bounds.
AssumptionReport check_assumption_bounds_serial(const ProblemInstance& instance, int samples,
                                                std::uint64_t seed);

}  // namespace vqoco
