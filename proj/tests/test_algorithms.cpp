#include <doctest.h>

#include <cmath>

#include "vqoco/algorithms.hpp"
#include "vqoco/environments.hpp"
#include "vqoco/metrics.hpp"

using namespace vqoco;

namespace {

AssumptionConstants unit_constants(double R, double beta) {
  AssumptionConstants c;
  c.R = R;
  c.beta = beta;
  return c;
}

}  // namespace

TEST_CASE("vqb dual update examples") {
  CHECK(vqb_dual_update(Vec{0.0, 0.0}, 0.7, Vec{0.0, 0.0}) == Vec{0.0, 0.0});
  CHECK(vqb_dual_update(Vec{1.0, 0.0}, 0.5, Vec{2.0, -1.0}) == Vec{2.0, 0.5});
  CHECK(vqb_dual_update(Vec{0.2}, 1.0, Vec{-3.0}) == Vec{3.0});
}

TEST_CASE("slater dual update examples") {
  CHECK(slater_dual_update(Vec{0.0}, 1.0, Vec{0.0}) == Vec{0.0});
  CHECK(slater_dual_update(Vec{1.0, 0.0}, 0.5, Vec{2.0, -1.0}) == Vec{2.0, 0.5});
  CHECK(slater_dual_update(Vec{5.0}, 1.0, Vec{-2.0}) == Vec{3.0});
}

TEST_CASE("queue properties hold on random updates") {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t K = 1 + static_cast<std::size_t>(rng.integer(0, 3));
    Vec lam(K), g(K);
    for (auto& v : lam) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 5.0);
    for (auto& v : g) v = rng.normal() * 3.0;
    const double gamma = rng.uniform(0.01, 3.0);
    const Vec next = vqb_dual_update(lam, gamma, g);
    CHECK(check_queue_update(lam, next, gamma, g).worst() <= 1e-12);
  }
}

TEST_CASE("schedule examples") {
  CHECK(alpha_schedule(1, 100, 2.0, 0.0) == doctest::Approx(std::sqrt(50.0)));
  CHECK(alpha_schedule(7, 100, 2.0, 2.0) == doctest::Approx(5.0));
  CHECK(alpha_schedule(3, 9, 9.0, 0.0) == doctest::Approx(1.0));
  CHECK(gamma_schedule(GammaCase::Case1, 5, 1.0, 2.0) == doctest::Approx(0.5));
  CHECK(gamma_schedule(GammaCase::Case2, 3, 1.0, 2.0) == doctest::Approx(std::sqrt(0.125)));
  // gamma^2 decays like 1/sqrt(t+1), so gamma itself like (t+1)^(-1/4).
  CHECK(gamma_schedule(GammaCase::Case2, 99999999, 1.0, 2.0) == doctest::Approx(0.005));
  // alpha is nonincreasing in the path length.
  double prev = alpha_schedule(1, 500, 3.0, 0.0);
  for (double p = 0.5; p < 50.0; p += 0.5) {
    const double a = alpha_schedule(1, 500, 3.0, p);
    CHECK(a <= prev);
    prev = a;
  }
}

TEST_CASE("slater parameter examples") {
  auto p = slater_params(0.5, 100, 1.0);
  CHECK(p.alpha == doctest::Approx(10.0));
  CHECK(p.gamma == doctest::Approx(std::sqrt(5.0)));
  p = slater_params(0.5, 1, 1.0);
  CHECK(p.alpha == doctest::Approx(1.0));
  CHECK(p.gamma == doctest::Approx(1.0 / std::sqrt(2.0)));
  p = slater_params(0.25, 16, 2.0);
  CHECK(p.alpha == doctest::Approx(2.0));
  CHECK(p.gamma == doctest::Approx(0.5));
}

TEST_CASE("slater queue bound is finite and grows with F") {
  AssumptionConstants c;
  c.F = 2.0;
  c.G = 3.0;
  c.R = 2.0;
  c.beta = 1.0;
  c.epsilon = 0.4;
  c.vbar_g = 0.05;
  const auto p = slater_params(0.5, 1000, 1.0);
  const double b = slater_queue_bound(c, p);
  CHECK(std::isfinite(b));
  const double g = p.gamma;
  const double expect = g * c.F + (c.G * c.R + g * g * 0.4 * c.F + 2 * g * g * c.F * c.F + p.alpha * c.R * c.R) /
                                      (g * (0.4 - 0.05));
  CHECK(b == doctest::Approx(expect));
  c.F = 3.0;
  CHECK(slater_queue_bound(c, p) > b);
}

TEST_CASE("vqb step with no forces keeps the point") {
  const auto chi = FeasibleSet::uniform_box(2, -1.0, 1.0);
  auto s = vqb_init(GammaCase::Case1, 10, unit_constants(diameter(chi), 1.0), {0.3, -0.2}, 1);
  const auto f = LossOracle::zero(2);
  const auto g = ConstraintOracle::zero(1, 2);
  for (int t = 0; t < 5; ++t) {
    auto r = vqb_step(s, f, g, chi, s.x);
    CHECK(r.x_next == Vec{0.3, -0.2});
    CHECK(r.record.lambda == Vec{0.0});
    s = r.state;
  }
}

TEST_CASE("vqb single-round 1-D example") {
  const auto chi = FeasibleSet::uniform_box(1, -1.0, 1.0);
  auto s = vqb_init(GammaCase::Case1, 4, unit_constants(2.0, 1.0), {0.0}, 1);
  CHECK(s.gamma_prev == doctest::Approx(0.5));
  const auto f = LossOracle::linear({1.0});
  const auto g = ConstraintOracle::affine({{1.0}}, {2.0});  // x - 2
  const auto r = vqb_step(s, f, g, chi, Vec{0.0});
  CHECK(r.record.lambda == Vec{0.0});
  CHECK(r.record.alpha == doctest::Approx(std::sqrt(2.0)));
  CHECK(r.record.gamma == doctest::Approx(0.5));
  CHECK(std::abs(r.x_next[0] + 1.0 / (2.0 * std::sqrt(2.0))) <= 1e-7);
  CHECK(r.state.t == 2);
  CHECK(r.state.g_prev_at_x[0] == doctest::Approx(r.x_next[0] - 2.0));
}

TEST_CASE("vqb step composes the dual update and the subproblem") {
  const auto chi = FeasibleSet::uniform_box(2, -1.0, 1.0);
  auto s = vqb_init(GammaCase::Case1, 50, unit_constants(diameter(chi), 1.0), {0.2, 0.1}, 2);
  s.t = 3;
  s.lambda = {1.0, 0.0};
  s.gamma_prev = 0.5;
  s.g_prev_at_x = {2.0, -1.0};
  const auto f = LossOracle::tracking({0.5, -0.5});
  const auto g = ConstraintOracle::affine({{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0});
  const auto r = vqb_step(s, f, g, chi, Vec{0.5, -0.5});
  CHECK(r.record.lambda == vqb_dual_update(Vec{1.0, 0.0}, 0.5, Vec{2.0, -1.0}));
  CHECK(r.record.lambda == Vec{2.0, 0.5});
  CHECK(r.record.dual_weight == Vec{3.0, 0.0});

  SubproblemSpec spec{s.x, f.grad(s.x), r.record.dual_weight, r.record.gamma, r.record.alpha, &g, &chi};
  const auto direct = solve_primal_subproblem(spec);
  CHECK(r.x_next == direct.x);
}

TEST_CASE("slater step 1-D example") {
  const auto chi = FeasibleSet::uniform_box(1, -2.0, 2.0);
  auto s = slater_init({1.0, 1.0}, unit_constants(4.0, 1.0), {1.0}, 1);
  const auto f = LossOracle::zero(1);
  const auto g = ConstraintOracle::affine({{1.0}}, {0.5});  // x - 0.5
  const auto r = slater_step(s, f, g, chi);
  CHECK(r.record.lambda == Vec{0.5});
  CHECK(r.record.dual_weight == Vec{1.0});
  // x' minimizes 1.0 * (x - 0.5) + (x - 1)^2 -> 0.5.
  CHECK(std::abs(r.x_next[0] - 0.5) <= 1e-7);
}

TEST_CASE("slater step with no forces keeps the point") {
  const auto chi = FeasibleSet::uniform_box(2, -1.0, 1.0);
  auto s = slater_init(slater_params(0.5, 100, 1.0), unit_constants(diameter(chi), 1.0), {0.0, 0.5}, 1);
  const auto r = slater_step(s, LossOracle::zero(2), ConstraintOracle::zero(1, 2), chi);
  CHECK(r.x_next == Vec{0.0, 0.5});
  CHECK(r.record.lambda == Vec{0.0});
}

TEST_CASE("saddle step examples") {
  const auto chi = FeasibleSet::uniform_box(1, -1.0, 1.0);
  const auto g = ConstraintOracle::affine({{1.0}}, {0.0});
  SaddleState s;
  s.x = {0.0};
  s.lambda = {2.0};
  s.eta_primal = 0.1;
  s.mu_dual = 1.0;
  auto r = saddle_step(s, LossOracle::linear({1.0}), g, chi);
  CHECK(r.x_next[0] == doctest::Approx(-0.3));
  CHECK(r.state.lambda[0] == doctest::Approx(1.7));

  // Plain projected OGD when the queue is empty.
  s.lambda = {0.0};
  s.x = {0.95};
  r = saddle_step(s, LossOracle::linear({-1.0}), g, chi);
  CHECK(r.x_next[0] == 1.0);

  s.x = {-1.0};
  s.lambda = {0.1};
  const auto g_neg = ConstraintOracle::affine({{0.0}}, {1.0});  // g = -1
  r = saddle_step(s, LossOracle::zero(1), g_neg, chi);
  CHECK(r.state.lambda == Vec{0.0});
}

TEST_CASE("preset examples") {
  auto p = preset_params("cao2018", 400, 5, 7.0);
  CHECK(p.table_values[0].second == doctest::Approx(1961.0));
  CHECK(p.eta == doctest::Approx(0.1));
  p = preset_params("chen2017", 8, 5, 7.0);
  CHECK(p.table_values[0].second == doctest::Approx(2.0));
  CHECK(p.mu == doctest::Approx(2.0));
  p = preset_params("chen2019", 100, 5, 7.0);
  CHECK(p.mu == doctest::Approx(0.1));
  CHECK(p.eta == doctest::Approx(0.2));
  CHECK(preset_params("vqb_case2", 10, 1, 1.0).vqb_case == GammaCase::Case2);
  CHECK_THROWS_AS(preset_params("nope", 10, 1, 1.0), ConfigError);
}

TEST_CASE("doubling epochs") {
  CHECK(doubling_epochs(2) == std::vector<int>{2});
  CHECK(doubling_epochs(10) == std::vector<int>{2, 4, 4});
  CHECK(doubling_epochs(14) == std::vector<int>{2, 4, 8});
  CHECK(doubling_epochs(1) == std::vector<int>{1});
  CHECK_THROWS_AS(doubling_epochs(0), ConfigError);
}

TEST_CASE("doubling learner restarts inner learners at epoch boundaries") {
  OrrConfig oc;
  oc.horizon = 30;
  const auto inst = orr_generate(oc);
  std::vector<int> built;
  LearnerContext ctx;
  ctx.constants = inst.constants;
  ctx.num_constraints = 1;
  auto factory = [&](int h, const Vec& x1) {
    built.push_back(h);
    LearnerContext c = ctx;
    c.horizon = h;
    c.x1 = x1;
    return make_vqb_learner(GammaCase::Case1, c);
  };
  auto learner = make_doubling_learner(factory, Vec(inst.dim, 0.0), "doubling_vqb_case1");
  const auto traj = run_online(*learner, inst);
  // Epochs 2, 4, 8, 16 cover 30 rounds; the fifth is built at the last boundary.
  CHECK(built == std::vector<int>{2, 4, 8, 16, 32});
  // Queues restart: the first round of each epoch has an empty queue.
  CHECK(traj.rounds[2].lambda_norm == 0.0);
  CHECK(traj.rounds[6].lambda_norm == 0.0);
  CHECK(traj.rounds[14].lambda_norm == 0.0);
  CHECK(traj.max_invariant_violation <= 1e-12);
}

TEST_CASE("learners stay feasible and deterministic") {
  OrrConfig oc;
  oc.horizon = 60;
  oc.seed = 9;
  const auto inst = orr_generate(oc);
  LearnerContext ctx;
  ctx.horizon = inst.horizon;
  ctx.constants = inst.constants;
  ctx.x1 = Vec(inst.dim, 0.0);
  ctx.num_constraints = 1;
  for (const std::string name : {"vqb_case1", "vqb_case2", "cao2018", "chen2019"}) {
    const auto p = preset_params(name, inst.horizon, 5, 7.0);
    auto make = [&] {
      return p.vqb_case ? make_vqb_learner(*p.vqb_case, ctx) : make_saddle_learner(p, ctx);
    };
    auto a = make();
    auto b = make();
    const auto ta = run_online(*a, inst);
    const auto tb = run_online(*b, inst);
    REQUIRE(ta.length() == inst.horizon);
    for (int t = 0; t < inst.horizon; ++t) {
      CHECK(contains(inst.set_at(t + 1), ta.rounds[t].x, 1e-12));
      CHECK(ta.rounds[t].x == tb.rounds[t].x);
    }
  }
}
