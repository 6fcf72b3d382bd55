#include <doctest.h>

#include <cmath>

#include "vqoco/algorithms.hpp"
#include "vqoco/environments.hpp"
#include "vqoco/metrics.hpp"

using namespace vqoco;

namespace {

Trajectory traj_from(const std::vector<double>& losses, const std::vector<Vec>& gs) {
  Trajectory tr;
  tr.num_constraints = gs.empty() ? 0 : gs[0].size();
  for (std::size_t i = 0; i < losses.size(); ++i) {
    RoundRecord r;
    r.x = {0.0};
    r.loss = losses[i];
    r.g = gs.empty() ? Vec{} : gs[i];
    tr.rounds.push_back(r);
  }
  return tr;
}

// g_t(x) = x - c_t on [-1, 1], f = 0.
ProblemInstance offset_instance(const std::vector<double>& c) {
  ProblemInstance inst;
  inst.name = "offset";
  inst.dim = 1;
  inst.num_constraints = 1;
  inst.horizon = static_cast<int>(c.size());
  for (double v : c) {
    inst.losses.push_back(LossOracle::zero(1));
    inst.constraints.push_back(ConstraintOracle::affine({{1.0}}, {v}));
    inst.sets.push_back(FeasibleSet::uniform_box(1, -1.0, 1.0));
  }
  return inst;
}

}  // namespace

TEST_CASE("dynamic regret examples") {
  const auto tr = traj_from({1.0, 2.0}, {});
  CHECK(dynamic_regret(tr, std::vector<double>{0.5, 0.5}) == std::vector<double>{0.5, 2.0});
  CHECK(dynamic_regret(tr, std::vector<double>{1.0, 2.0}) == std::vector<double>{0.0, 0.0});
  const auto neg = dynamic_regret(tr, std::vector<double>{3.0, 2.0});
  CHECK(neg[0] == -2.0);
  CHECK_THROWS_AS(dynamic_regret(tr, std::vector<double>{1.0}), ConfigError);

  // Oracle form evaluates the comparator losses itself.
  const std::vector<LossOracle> losses{LossOracle::linear({1.0}, 0.0), LossOracle::linear({1.0}, 0.0)};
  Trajectory t2 = traj_from({0.0, 0.0}, {});
  t2.rounds[0].loss = 1.0;
  t2.rounds[1].loss = 1.0;
  const std::vector<Vec> mins{{0.5}, {1.0}};
  CHECK(dynamic_regret(t2, mins, losses) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("violation examples") {
  const auto zero = violations(traj_from({0.0, 0.0}, {{0.0, 0.0}, {0.0, 0.0}}));
  CHECK(zero[0] == std::vector<double>{0.0, 0.0});
  const auto v = violations(traj_from({0.0, 0.0}, {{1.0, -1.0}, {0.5, -0.2}}));
  CHECK(v[0].back() == doctest::Approx(1.5));
  CHECK(v[1].back() == doctest::Approx(-1.2));
  CHECK(violations(traj_from({0.0}, {{-3.0}}))[0] == std::vector<double>{-3.0});
}

TEST_CASE("regret and violations are prefix sums") {
  Rng rng(2);
  std::vector<double> losses, comp;
  std::vector<Vec> gs;
  for (int i = 0; i < 40; ++i) {
    losses.push_back(rng.normal());
    comp.push_back(rng.normal());
    gs.push_back({rng.normal(), rng.normal()});
  }
  const auto full_r = dynamic_regret(traj_from(losses, gs), comp);
  const auto full_v = violations(traj_from(losses, gs));
  const std::vector<double> head_l(losses.begin(), losses.begin() + 15), head_c(comp.begin(), comp.begin() + 15);
  const std::vector<Vec> head_g(gs.begin(), gs.begin() + 15);
  const auto part_r = dynamic_regret(traj_from(head_l, head_g), head_c);
  const auto part_v = violations(traj_from(head_l, head_g));
  for (int i = 0; i < 15; ++i) {
    CHECK(part_r[i] == full_r[i]);
    CHECK(part_v[1][i] == full_v[1][i]);
  }
}

TEST_CASE("path length examples") {
  CHECK(path_length(std::vector<Vec>{{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}) == 0.0);
  CHECK(path_length(std::vector<Vec>{{0.0}, {1.0}, {-1.0}}) == doctest::Approx(3.0));
  CHECK(path_length(std::vector<Vec>{{4.0}}) == 0.0);
}

TEST_CASE("function variation examples") {
  CHECK(function_variation(offset_instance({0.2, 0.2, 0.2}), 16, 1).value == 0.0);
  const auto fv = function_variation(offset_instance({0.0, 1.0, 3.0}), 16, 1);
  CHECK(fv.value == doctest::Approx(3.0));
  CHECK_FALSE(fv.analytic);
  CHECK(fv.value == function_variation_serial(offset_instance({0.0, 1.0, 3.0}), 16, 1).value);

  OrrConfig oc;
  oc.horizon = 200;
  const auto inst = orr_generate(oc);
  const auto orr = function_variation(inst, 16, 1);
  CHECK(orr.analytic);
  double expect = 0.0;
  for (std::size_t t = 1; t < inst.minimizers->size(); ++t)
    expect += std::abs(norm((*inst.minimizers)[t]) - norm((*inst.minimizers)[t - 1]));
  CHECK(orr.value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("growth exponent recovers planted slopes") {
  std::vector<double> lin, root, flat;
  for (int t = 1; t <= 400; ++t) {
    lin.push_back(t);
    root.push_back(std::sqrt(t));
    flat.push_back(5.0);
  }
  CHECK(growth_exponent(lin, 100, 400).slope == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(growth_exponent(root, 100, 400).slope == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(growth_exponent(flat, 100, 400).slope) <= 1e-6);
  CHECK_THROWS_AS(growth_exponent(lin, 10, 18), ConfigError);
  CHECK(default_window(2000) == std::pair<int, int>{500, 2000});
}

TEST_CASE("violation bounds along learner trajectories") {
  SlaterConfig sc;
  sc.horizon = 300;
  const auto sl = slater_instance(sc);
  LearnerContext ctx;
  ctx.horizon = sl.horizon;
  ctx.constants = sl.constants;
  ctx.x1 = {0.0, 0.0};
  ctx.num_constraints = 1;

  // Algorithm 2: sum_t g_t(x_t) <= lambda(T) / gamma exactly.
  auto slater = make_slater_learner(0.5, ctx);
  const auto ts = run_online(*slater, sl);
  const double gamma = slater_params(0.5, sl.horizon, sl.constants.beta).gamma;
  const auto vs = violations(ts);
  CHECK(vs[0].back() <= ts.rounds.back().lambda[0] / gamma + 1e-9);

  // VQB on ORR: sum_t g_t(x_t) <= ||lambda(T)||/gamma_T + V_g + g_1(x_1) (+ solver tolerance).
  // The g_1(x_1) term comes from the first round, which no dual update sees.
  OrrConfig oc;
  oc.horizon = 300;
  const auto orr = orr_generate(oc);
  ctx.horizon = orr.horizon;
  ctx.constants = orr.constants;
  ctx.x1 = Vec(orr.dim, 0.0);
  for (GammaCase c : {GammaCase::Case1, GammaCase::Case2}) {
    auto vqb = make_vqb_learner(c, ctx);
    const auto tv = run_online(*vqb, orr);
    const auto vg = function_variation(orr, 16, 1);
    REQUIRE(vg.analytic);
    const double lhs = violations(tv)[0].back();
    const double rhs = tv.rounds.back().lambda_norm / tv.rounds.back().gamma + vg.value + tv.rounds[0].g[0];
    CHECK(lhs <= rhs + 1e-4);
  }
}

TEST_CASE("compute_metrics wiring") {
  OrrConfig oc;
  oc.horizon = 120;
  const auto inst = orr_generate(oc);
  const auto comp = compute_comparator(inst);
  CHECK(comp.exact);
  CHECK(comp.max_violation <= 1e-12);
  for (double l : comp.losses) CHECK(std::abs(l) <= 1e-18);
  LearnerContext ctx;
  ctx.horizon = inst.horizon;
  ctx.constants = inst.constants;
  ctx.x1 = Vec(inst.dim, 0.0);
  ctx.num_constraints = 1;
  auto l = make_vqb_learner(GammaCase::Case1, ctx);
  const auto tr = run_online(*l, inst);
  const auto m = compute_metrics(tr, comp, function_variation(inst, 16, 1), default_window(inst.horizon));
  CHECK(m.regret_cum.size() == 120);
  CHECK(m.regret_avg.back() == doctest::Approx(m.regret_cum.back() / 120.0));
  CHECK(m.V_x == doctest::Approx(path_length(*inst.minimizers)));
  CHECK(max_violation_series(m) == m.vio_cum[0]);
}
