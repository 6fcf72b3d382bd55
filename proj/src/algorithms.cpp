#include "vqoco/algorithms.hpp"

#include <algorithm>
#include <cmath>

namespace vqoco {

double Trajectory::max_residual() const {
  double m = 0.0;
  for (const auto& r : rounds) m = std::max(m, r.residual);
  return m;
}

namespace {

Vec queue_update(std::span<const double> lambda_prev, double scale, std::span<const double> g) {
  require(lambda_prev.size() == g.size(), "dual update: queue and constraint lengths differ");
  require(scale >= 0.0, "dual update: step must be >= 0");
  Vec out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double s = scale * g[k];
    out[k] = std::max(lambda_prev[k] + s, -s);
  }
  return out;
}

// lambda + scale * g, computed with the same products as queue_update so the
// result is exactly nonnegative.
Vec shifted_queue(std::span<const double> lambda, double scale, std::span<const double> g) {
  Vec w(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) w[k] = std::max(0.0, lambda[k] + scale * g[k]);
  return w;
}

}  // namespace

Vec vqb_dual_update(std::span<const double> lambda_prev, double gamma_prev, std::span<const double> g_prev_at_x) {
  return queue_update(lambda_prev, gamma_prev, g_prev_at_x);
}

Vec slater_dual_update(std::span<const double> lambda_prev, double gamma, std::span<const double> g_now_at_x) {
  return queue_update(lambda_prev, gamma, g_now_at_x);
}

double alpha_schedule(int t, int horizon, double R, double path_len) {
  require(t >= 1 && horizon >= 1, "alpha schedule: round and horizon must be >= 1");
  require(R > 0.0, "alpha schedule: R must be > 0");
  require(path_len >= 0.0, "alpha schedule: path length must be >= 0");
  return std::sqrt(static_cast<double>(horizon) / (R + path_len));
}

double gamma_schedule(GammaCase c, int t, double beta, double R) {
  require(beta > 0.0 && R > 0.0, "gamma schedule: beta and R must be > 0");
  require(t >= 0, "gamma schedule: t must be >= 0");
  double g2 = 1.0 / (2.0 * beta * beta) / std::sqrt(2.0 * R);
  if (c == GammaCase::Case2) g2 /= std::sqrt(static_cast<double>(t) + 1.0);
  return std::sqrt(g2);
}

SlaterParams slater_params(double a, int horizon, double beta) {
  require(a > 0.0 && a < 1.0, "slater params: exponent a must lie in (0, 1)");
  require(horizon >= 1, "slater params: horizon must be >= 1");
  require(beta > 0.0, "slater params: beta must be > 0");
  const double ta = std::pow(static_cast<double>(horizon), a);
  return {ta, std::sqrt(ta / (2.0 * beta * beta))};
}

double slater_queue_bound(const AssumptionConstants& c, const SlaterParams& p) {
  require(c.epsilon.has_value() && c.vbar_g.has_value(), "queue bound: instance lacks Slater constants");
  const double gap = *c.epsilon - *c.vbar_g;
  require(gap > 0.0, "queue bound: epsilon must exceed vbar_g");
  const double g = p.gamma;
  const double g2 = g * g;
  return g * c.F + (c.G * c.R + g2 * *c.epsilon * c.F + 2.0 * g2 * c.F * c.F + p.alpha * c.R * c.R) / (g * gap);
}

double QueueCheck::worst() const {
  return std::max({nonnegative, shifted_nonneg, norm_dominates, increment, drift});
}

QueueCheck check_queue_update(std::span<const double> lambda_prev, std::span<const double> lambda, double scale,
                              std::span<const double> g) {
  QueueCheck q;
  Vec s(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) s[k] = scale * g[k];
  for (std::size_t k = 0; k < g.size(); ++k) {
    q.nonnegative = std::max(q.nonnegative, -lambda[k]);
    q.shifted_nonneg = std::max(q.shifted_nonneg, -(lambda[k] + s[k]));
    q.increment = std::max(q.increment, s[k] - (lambda[k] - lambda_prev[k]));
  }
  const double nl = norm(lambda);
  const double nlp = norm(lambda_prev);
  const double ns = norm(s);
  q.norm_dominates = std::max(0.0, ns - nl);
  q.increment = std::max(q.increment, nl - nlp - ns);
  const double drift = 0.5 * nl * nl - 0.5 * nlp * nlp;
  q.drift = std::max(0.0, drift - (dot(lambda_prev, s) + ns * ns));
  return q;
}

VqbState vqb_init(GammaCase c, int horizon, const AssumptionConstants& constants, Vec x1,
                  std::size_t num_constraints) {
  require(horizon >= 1, "vqb: horizon must be >= 1");
  require(all_finite(x1), "vqb: initial point must be finite");
  VqbState s;
  s.t = 1;
  s.horizon = horizon;
  s.x = std::move(x1);
  s.lambda.assign(num_constraints, 0.0);
  s.g_prev_at_x.assign(num_constraints, 0.0);
  s.gamma_prev = gamma_schedule(c, 0, constants.beta, constants.R);
  s.schedule = c;
  s.constants = constants;
  return s;
}

StepResult<VqbState> vqb_step(const VqbState& state, const LossOracle& f_t, const ConstraintOracle& g_t,
                              const FeasibleSet& chi_next, std::span<const double> x_star_t, const SolverConfig& cfg) {
  StepResult<VqbState> out;
  auto& rec = out.record;
  rec.lambda_prev = state.lambda;
  rec.gamma_prev = state.gamma_prev;
  rec.g_used = state.g_prev_at_x;
  rec.lambda = vqb_dual_update(state.lambda, state.gamma_prev, state.g_prev_at_x);
  rec.dual_weight = shifted_queue(rec.lambda, state.gamma_prev, state.g_prev_at_x);

  double path_len = state.path_len;
  if (state.prev_minimizer) path_len += dist(x_star_t, *state.prev_minimizer);
  rec.alpha = alpha_schedule(state.t, state.horizon, state.constants.R, path_len);
  rec.gamma = gamma_schedule(state.schedule, state.t, state.constants.beta, state.constants.R);

  SubproblemSpec spec{state.x, f_t.grad(state.x), rec.dual_weight, rec.gamma, rec.alpha, &g_t, &chi_next};
  SubproblemResult sol;
  try {
    sol = solve_primal_subproblem(spec, cfg);
  } catch (const NumericError& e) {
    throw NumericError("vqb round " + std::to_string(state.t) + ": " + e.what());
  }
  rec.residual = sol.residual;
  rec.converged = sol.converged;

  auto& next = out.state;
  next = state;
  next.t = state.t + 1;
  next.x = sol.x;
  next.lambda = rec.lambda;
  next.g_prev_at_x = g_t.eval(sol.x);
  next.gamma_prev = rec.gamma;
  next.path_len = path_len;
  next.prev_minimizer = Vec(x_star_t.begin(), x_star_t.end());
  out.x_next = std::move(sol.x);
  return out;
}

SlaterState slater_init(const SlaterParams& p, const AssumptionConstants& constants, Vec x1,
                        std::size_t num_constraints) {
  require(p.alpha > 0.0 && p.gamma > 0.0, "slater: alpha and gamma must be > 0");
  SlaterState s;
  s.x = std::move(x1);
  s.lambda.assign(num_constraints, 0.0);
  s.g_now_at_x.assign(num_constraints, 0.0);
  s.alpha = p.alpha;
  s.gamma = p.gamma;
  s.constants = constants;
  return s;
}

StepResult<SlaterState> slater_step(const SlaterState& state, const LossOracle& f_t, const ConstraintOracle& g_t,
                                    const FeasibleSet& chi_next, const SolverConfig& cfg) {
  StepResult<SlaterState> out;
  auto& rec = out.record;
  const Vec g_now = g_t.eval(state.x);
  rec.lambda_prev = state.lambda;
  rec.gamma_prev = state.gamma;
  rec.g_used = g_now;
  rec.lambda = slater_dual_update(state.lambda, state.gamma, g_now);
  rec.dual_weight = shifted_queue(rec.lambda, state.gamma, g_now);
  rec.alpha = state.alpha;
  rec.gamma = state.gamma;

  SubproblemSpec spec{state.x, f_t.grad(state.x), rec.dual_weight, state.gamma, state.alpha, &g_t, &chi_next};
  SubproblemResult sol;
  try {
    sol = solve_primal_subproblem(spec, cfg);
  } catch (const NumericError& e) {
    throw NumericError("slater round " + std::to_string(state.t) + ": " + e.what());
  }
  rec.residual = sol.residual;
  rec.converged = sol.converged;

  auto& next = out.state;
  next = state;
  next.t = state.t + 1;
  next.x = sol.x;
  next.lambda = rec.lambda;
  next.g_now_at_x = g_now;
  out.x_next = std::move(sol.x);
  return out;
}

StepResult<SaddleState> saddle_step(const SaddleState& state, const LossOracle& f_t, const ConstraintOracle& g_t,
                                    const FeasibleSet& chi_next) {
  StepResult<SaddleState> out;
  Vec direction = f_t.grad(state.x);
  const Matrix jac = g_t.jac(state.x);
  for (std::size_t k = 0; k < jac.size(); ++k)
    if (state.lambda[k] != 0.0) axpy(state.lambda[k], jac[k], direction);
  Vec y = state.x;
  axpy(-state.eta_primal, direction, y);
  Vec x_next = project(chi_next, y);

  const Vec g_next = g_t.eval(x_next);
  Vec lambda(state.lambda.size());
  for (std::size_t k = 0; k < lambda.size(); ++k) lambda[k] = std::max(0.0, state.lambda[k] + state.mu_dual * g_next[k]);

  auto& rec = out.record;
  rec.lambda_prev = state.lambda;
  rec.lambda = lambda;
  rec.gamma_prev = state.mu_dual;
  rec.g_used = g_next;
  rec.alpha = state.eta_primal;
  rec.gamma = state.mu_dual;

  out.state = state;
  out.state.t = state.t + 1;
  out.state.x = x_next;
  out.state.lambda = std::move(lambda);
  out.x_next = std::move(x_next);
  return out;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"cao2018", "chen2017", "chen2018", "chen2019", "vqb_case1", "vqb_case2"};
  return names;
}

PresetParams preset_params(const std::string& name, int horizon, std::size_t n, double C) {
  require(horizon >= 1, "preset: horizon must be >= 1");
  const double T = horizon;
  PresetParams p;
  p.name = name;
  if (name == "cao2018") {
    const double delta = 8.0 * static_cast<double>(n) * C * C + 1.0;
    p.eta = 2.0 / std::sqrt(T);
    p.mu = p.eta;
    p.table_values = {{"delta", delta}, {"eta", p.eta}};
    p.mapping = "eta as tabulated, mu = eta; delta recorded only";
  } else if (name == "chen2017") {
    const double a = std::cbrt(T);
    p.eta = 1.0 / a;
    p.mu = a;
    p.table_values = {{"alpha", a}, {"mu", a}};
    p.mapping = "eta = 1/alpha, mu as tabulated";
  } else if (name == "chen2018") {
    const double lambda1 = 4.0 * std::sqrt(2.0) * std::pow(T, 0.125);
    p.eta = 1.0 / lambda1;
    p.mu = 1.0;
    p.table_values = {{"delta", 1.0}, {"lambda1", lambda1}};
    p.mapping = "eta = 1/lambda1, mu = delta";
  } else if (name == "chen2019") {
    const double mu = 1.0 / std::sqrt(T);
    p.eta = 2.0 / std::sqrt(T);
    p.mu = mu;
    p.table_values = {{"mu", mu}, {"alpha", p.eta}};
    p.mapping = "eta = alpha, mu as tabulated";
  } else if (name == "vqb_case1") {
    p.vqb_case = GammaCase::Case1;
    p.mapping = "alpha_t and gamma_t from the Case 1 schedule";
  } else if (name == "vqb_case2") {
    p.vqb_case = GammaCase::Case2;
    p.mapping = "alpha_t and gamma_t from the Case 2 schedule";
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return p;
}

namespace {

class VqbLearner final : public OnlineLearner {
 public:
  VqbLearner(GammaCase c, const LearnerContext& ctx)
      : state_(vqb_init(c, ctx.horizon, ctx.constants, ctx.x1, ctx.num_constraints)),
        cfg_(ctx.solver),
        mode_(ctx.minimizers),
        name_(c == GammaCase::Case1 ? "vqb_case1" : "vqb_case2") {
    snap_.lambda = state_.lambda;
  }

  const Vec& act() const override { return state_.x; }

  void observe(const Feedback& fb) override {
    Vec x_star;
    if (mode_ == MinimizerSource::Exact && fb.minimizer) {
      x_star = *fb.minimizer;
    } else {
      x_star = per_slot_minimizer(fb.loss, fb.constraints, fb.set).x;
      used_solver_ = true;
    }
    auto r = vqb_step(state_, fb.loss, fb.constraints, fb.next_set, x_star, cfg_);
    snap_ = {r.record.lambda, r.record.alpha, r.record.gamma, r.record.residual, r.record.converged,
             check_queue_update(r.record.lambda_prev, r.record.lambda, r.record.gamma_prev, r.record.g_used).worst()};
    state_ = std::move(r.state);
  }

  LearnerSnapshot snapshot() const override { return snap_; }
  std::string name() const override { return name_; }
  std::string minimizer_source() const override { return used_solver_ ? "solver" : "exact"; }

 private:
  VqbState state_;
  SolverConfig cfg_;
  MinimizerSource mode_;
  std::string name_;
  LearnerSnapshot snap_;
  bool used_solver_ = false;
};

class SlaterLearner final : public OnlineLearner {
 public:
  SlaterLearner(double a, const LearnerContext& ctx)
      : state_(slater_init(slater_params(a, ctx.horizon, ctx.constants.beta), ctx.constants, ctx.x1,
                           ctx.num_constraints)),
        cfg_(ctx.solver) {
    snap_.lambda = state_.lambda;
  }

  const Vec& act() const override { return state_.x; }

  void observe(const Feedback& fb) override {
    auto r = slater_step(state_, fb.loss, fb.constraints, fb.next_set, cfg_);
    snap_ = {r.record.lambda, r.record.alpha, r.record.gamma, r.record.residual, r.record.converged,
             check_queue_update(r.record.lambda_prev, r.record.lambda, r.record.gamma_prev, r.record.g_used).worst()};
    state_ = std::move(r.state);
  }

  LearnerSnapshot snapshot() const override { return snap_; }
  std::string name() const override { return "slater"; }

 private:
  SlaterState state_;
  SolverConfig cfg_;
  LearnerSnapshot snap_;
};

class SaddleLearner final : public OnlineLearner {
 public:
  SaddleLearner(const PresetParams& p, const LearnerContext& ctx) {
    state_.x = ctx.x1;
    state_.lambda.assign(ctx.num_constraints, 0.0);
    state_.eta_primal = p.eta;
    state_.mu_dual = p.mu;
    state_.preset = p.name;
    snap_.lambda = state_.lambda;
  }

  const Vec& act() const override { return state_.x; }

  void observe(const Feedback& fb) override {
    auto r = saddle_step(state_, fb.loss, fb.constraints, fb.next_set);
    snap_ = {r.record.lambda, r.record.alpha, r.record.gamma, 0.0, true, 0.0};
    state_ = std::move(r.state);
  }

  LearnerSnapshot snapshot() const override { return snap_; }
  std::string name() const override { return state_.preset; }

 private:
  SaddleState state_;
  LearnerSnapshot snap_;
};

class DoublingLearner final : public OnlineLearner {
 public:
  DoublingLearner(LearnerFactory factory, const Vec& x1, std::string name)
      : factory_(std::move(factory)), name_(std::move(name)) {
    inner_ = factory_(epoch_length(), x1);
    snap_ = inner_->snapshot();
  }

  const Vec& act() const override { return inner_->act(); }

  void observe(const Feedback& fb) override {
    inner_->observe(fb);
    snap_ = inner_->snapshot();
    if (inner_->minimizer_source() == "solver") source_ = "solver";
    if (++rounds_in_epoch_ == epoch_length()) {
      const Vec next_x = inner_->act();
      ++epoch_;
      rounds_in_epoch_ = 0;
      inner_ = factory_(epoch_length(), next_x);
    }
  }

  LearnerSnapshot snapshot() const override { return snap_; }
  std::string name() const override { return name_; }
  std::string minimizer_source() const override { return source_; }

 private:
  int epoch_length() const { return 1 << epoch_; }

  LearnerFactory factory_;
  std::string name_;
  std::unique_ptr<OnlineLearner> inner_;
  LearnerSnapshot snap_;
  int epoch_ = 1;
  int rounds_in_epoch_ = 0;
  std::string source_ = "exact";
};

}  // namespace

std::unique_ptr<OnlineLearner> make_vqb_learner(GammaCase c, const LearnerContext& ctx) {
  return std::make_unique<VqbLearner>(c, ctx);
}

std::unique_ptr<OnlineLearner> make_slater_learner(double a, const LearnerContext& ctx) {
  return std::make_unique<SlaterLearner>(a, ctx);
}

std::unique_ptr<OnlineLearner> make_saddle_learner(const PresetParams& p, const LearnerContext& ctx) {
  require(!p.vqb_case.has_value(), "saddle learner: preset '" + p.name + "' is a VQB preset");
  return std::make_unique<SaddleLearner>(p, ctx);
}

std::unique_ptr<OnlineLearner> make_doubling_learner(LearnerFactory factory, const Vec& x1, std::string name) {
  return std::make_unique<DoublingLearner>(std::move(factory), x1, std::move(name));
}

std::vector<int> doubling_epochs(int true_horizon) {
  require(true_horizon >= 1, "doubling: horizon must be >= 1");
  std::vector<int> lengths;
  int remaining = true_horizon;
  for (int i = 1; remaining > 0; ++i) {
    const int len = std::min(1 << i, remaining);
    lengths.push_back(len);
    remaining -= len;
  }
  return lengths;
}

Trajectory run_online(OnlineLearner& learner, const ProblemInstance& instance, bool share_minimizers) {
  Trajectory traj;
  traj.algorithm = learner.name();
  traj.num_constraints = instance.num_constraints;
  traj.rounds.reserve(static_cast<std::size_t>(instance.horizon));
  for (int t = 1; t <= instance.horizon; ++t) {
    RoundRecord rec;
    rec.x = learner.act();
    if (!contains(instance.set_at(t), rec.x, 1e-9))
      throw NumericError(learner.name() + ": action left the feasible set at round " + std::to_string(t));
    const auto& f = instance.loss_at(t);
    const auto& g = instance.constraints_at(t);
    rec.loss = f.eval(rec.x);
    rec.g = g.eval(rec.x);
    const std::optional<Vec> x_star = share_minimizers ? instance.minimizer_at(t) : std::nullopt;
    Feedback fb{t, f, g, instance.set_at(t), instance.set_at(std::min(t + 1, instance.horizon)),
                x_star ? &*x_star : nullptr};
    learner.observe(fb);
    const auto snap = learner.snapshot();
    rec.lambda = snap.lambda;
    rec.lambda_norm = norm(snap.lambda);
    rec.alpha = snap.alpha;
    rec.gamma = snap.gamma;
    rec.residual = snap.residual;
    if (!snap.converged) ++traj.unconverged_rounds;
    traj.max_invariant_violation = std::max(traj.max_invariant_violation, snap.invariant_violation);
    traj.rounds.push_back(std::move(rec));
  }
  traj.minimizer_source = learner.minimizer_source();
  return traj;
}

}  // namespace vqoco
