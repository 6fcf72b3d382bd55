#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqoco/problem.hpp"
#include "vqoco/subsolvers.hpp"
#include "vqoco/trajectory.hpp"

namespace vqoco {

// ---------------------------------------------------------------------------
// Schedules and queue updates

enum class GammaCase { Case1, Case2 };

/// max{lambda + gamma g, -gamma g}, componentwise. Shared by both queue
/// variants; they differ only in which constraint value they feed in.
Vec vqb_dual_update(std::span<const double> lambda_prev, double gamma_prev, std::span<const double> g_prev_at_x);
Vec slater_dual_update(std::span<const double> lambda_prev, double gamma, std::span<const double> g_now_at_x);

/// sqrt(T / (R + path_len)).
double alpha_schedule(int t, int horizon, double R, double path_len);

/// gamma_t with gamma^2 = 1/(2 beta^2) / sqrt(2R), times 1/sqrt(t+1) for Case 2.
double gamma_schedule(GammaCase c, int t, double beta, double R);

struct SlaterParams {
  double alpha = 1.0;
  double gamma = 1.0;
};

/// alpha = T^a, gamma^2 = T^a / (2 beta^2).
SlaterParams slater_params(double a, int horizon, double beta);

/// Numeric cap on ||lambda(t)|| for the Slater variant:
/// gamma F + (G R + gamma^2 eps F + 2 gamma^2 F^2 + alpha R^2) / (gamma (eps - vbar_g)).
double slater_queue_bound(const AssumptionConstants& c, const SlaterParams& p);

/// Worst violations of the queue properties for one dual update
/// lambda = max{lambda_prev + s, -s} with s = scale * g. Each entry is
/// max(0, lhs - rhs); zero means the property holds.
struct QueueCheck {
  double nonnegative = 0.0;     // lambda >= 0
  double shifted_nonneg = 0.0;  // lambda + s >= 0
  double norm_dominates = 0.0;  // ||lambda|| >= ||s||
  double increment = 0.0;       // s <= lambda - lambda_prev and ||lambda|| - ||lambda_prev|| <= ||s||
  double drift = 0.0;           // 0.5||lambda||^2 - 0.5||lambda_prev||^2 <= lambda_prev^T s + ||s||^2
  double worst() const;
};

QueueCheck check_queue_update(std::span<const double> lambda_prev, std::span<const double> lambda, double scale,
                              std::span<const double> g);

// ---------------------------------------------------------------------------
// Step functions

struct VqbState {
  int t = 1;
  int horizon = 1;
  Vec x;
  Vec lambda;       // lambda(t-1)
  Vec g_prev_at_x;  // g_{t-1}(x_t)
  double gamma_prev = 0.0;
  double path_len = 0.0;
  std::optional<Vec> prev_minimizer;
  GammaCase schedule = GammaCase::Case1;
  AssumptionConstants constants;
};

VqbState vqb_init(GammaCase c, int horizon, const AssumptionConstants& constants, Vec x1, std::size_t num_constraints);

/// Quantities of one update, kept for invariant checks and trajectories.
struct StepRecord {
  Vec lambda_prev;
  Vec lambda;
  double gamma_prev = 0.0;  // scale used in the dual update
  Vec g_used;               // constraint value fed to the dual update
  Vec dual_weight;
  double alpha = 0.0;
  double gamma = 0.0;
  double residual = 0.0;
  bool converged = true;
};

template <typename State>
struct StepResult {
  State state;
  Vec x_next;
  StepRecord record;
};

StepResult<VqbState> vqb_step(const VqbState& state, const LossOracle& f_t, const ConstraintOracle& g_t,
                              const FeasibleSet& chi_next, std::span<const double> x_star_t,
                              const SolverConfig& cfg = {});

struct SlaterState {
  int t = 1;
  Vec x;
  Vec lambda;      // lambda(t-1)
  Vec g_now_at_x;  // g_t(x_t) from the latest update
  double alpha = 1.0;
  double gamma = 1.0;
  AssumptionConstants constants;
};

SlaterState slater_init(const SlaterParams& p, const AssumptionConstants& constants, Vec x1,
                        std::size_t num_constraints);

StepResult<SlaterState> slater_step(const SlaterState& state, const LossOracle& f_t, const ConstraintOracle& g_t,
                                    const FeasibleSet& chi_next, const SolverConfig& cfg = {});

struct SaddleState {
  int t = 1;
  Vec x;
  Vec lambda;
  double eta_primal = 0.1;
  double mu_dual = 0.1;
  std::string preset;
};

StepResult<SaddleState> saddle_step(const SaddleState& state, const LossOracle& f_t, const ConstraintOracle& g_t,
                                    const FeasibleSet& chi_next);

// ---------------------------------------------------------------------------
// Presets

struct PresetParams {
  std::string name;
  std::optional<GammaCase> vqb_case;  // set for the VQB presets
  double eta = 0.0;                   // primal step for the saddle baseline
  double mu = 0.0;                    // dual step for the saddle baseline
  std::vector<std::pair<std::string, double>> table_values;  // constants as tabulated
  std::string mapping;  // how the tabulated constants map onto (eta, mu)
};

const std::vector<std::string>& preset_names();
PresetParams preset_params(const std::string& name, int horizon, std::size_t n, double C);

// ---------------------------------------------------------------------------
// Learner protocol

/// Everything revealed after the action of round t.
struct Feedback {
  int t = 1;
  const LossOracle& loss;
  const ConstraintOracle& constraints;
  const FeasibleSet& set;       // chi(t)
  const FeasibleSet& next_set;  // chi(t+1)
  const Vec* minimizer = nullptr;  // x_t^* when the environment provides it
};

struct LearnerSnapshot {
  Vec lambda;
  double alpha = 0.0;
  double gamma = 0.0;
  double residual = 0.0;
  bool converged = true;
  double invariant_violation = 0.0;
};

class OnlineLearner {
 public:
  virtual ~OnlineLearner() = default;
  /// Action for the current round; depends only on past feedback.
  virtual const Vec& act() const = 0;
  virtual void observe(const Feedback& fb) = 0;
  virtual LearnerSnapshot snapshot() const = 0;
  virtual std::string name() const = 0;
  /// Whether the learner consumed environment-provided or solver-computed minimizers.
  virtual std::string minimizer_source() const { return "none"; }
};

enum class MinimizerSource { Exact, Solver };

struct LearnerContext {
  int horizon = 1;
  AssumptionConstants constants;
  Vec x1;
  std::size_t num_constraints = 0;
  SolverConfig solver;
  MinimizerSource minimizers = MinimizerSource::Exact;
};

std::unique_ptr<OnlineLearner> make_vqb_learner(GammaCase c, const LearnerContext& ctx);
std::unique_ptr<OnlineLearner> make_slater_learner(double a, const LearnerContext& ctx);
std::unique_ptr<OnlineLearner> make_saddle_learner(const PresetParams& p, const LearnerContext& ctx);

/// Builds a fresh learner for an epoch of the given horizon starting at x1.
using LearnerFactory = std::function<std::unique_ptr<OnlineLearner>(int epoch_horizon, const Vec& x1)>;

/// Doubling-trick wrapper: epoch i (from 1) runs a fresh learner built for
/// horizon 2^i. The new epoch starts from the action the previous epoch had
/// chosen for the boundary round; queues and schedules restart.
std::unique_ptr<OnlineLearner> make_doubling_learner(LearnerFactory factory, const Vec& x1, std::string name);

/// Epoch lengths the doubling trick uses for a true horizon.
std::vector<int> doubling_epochs(int true_horizon);

/// Drives a learner through every round of an instance. Minimizers are passed
/// to the learner only when the instance has them and `share_minimizers` is set.
Trajectory run_online(OnlineLearner& learner, const ProblemInstance& instance, bool share_minimizers = true);

}  // namespace vqoco
