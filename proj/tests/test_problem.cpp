#include <doctest.h>

#include <cmath>
#include <limits>

#include "vqoco/environments.hpp"
#include "vqoco/problem.hpp"

using namespace vqoco;

namespace {

// Nearest grid point of the capped box by exhaustive search.
Vec brute_capped_projection(const Vec& p, double h) {
  Vec best;
  double best_d = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::lround(1.0 / h));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const Vec x{i * h, j * h};
      if (x[0] + x[1] > 1.0 + 1e-12) continue;
      const double d = dist(x, p);
      if (d < best_d) best_d = d, best = x;
    }
  return best;
}

ProblemInstance constant_instance(LossOracle f, ConstraintOracle g, FeasibleSet set, AssumptionConstants c, int T) {
  ProblemInstance inst;
  inst.name = "const";
  inst.dim = set.dim();
  inst.num_constraints = g.count;
  inst.horizon = T;
  for (int t = 0; t < T; ++t) {
    inst.losses.push_back(f);
    inst.constraints.push_back(g);
    inst.sets.push_back(set);
  }
  inst.constants = c;
  return inst;
}

}  // namespace

TEST_CASE("projection examples") {
  const auto box = FeasibleSet::uniform_box(2, -1.0, 1.0);
  CHECK(project(box, Vec{3.0, 0.0}) == Vec{1.0, 0.0});

  const auto ball = FeasibleSet::ball({0.0, 0.0}, 1.0);
  const Vec b = project(ball, Vec{0.0, 2.0});
  CHECK(b[0] == doctest::Approx(0.0));
  CHECK(b[1] == doctest::Approx(1.0));

  const Vec inside{0.25, -0.5};
  CHECK(project(box, inside) == inside);
  CHECK(project(ball, inside) == inside);

  const auto capped = FeasibleSet::capped_box({0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}, 1.0);
  CHECK(project(capped, Vec{0.2, 0.3}) == Vec{0.2, 0.3});
  const Vec c = project(capped, Vec{1.0, 1.0});
  const Vec oracle = brute_capped_projection({1.0, 1.0}, 1e-3);
  CHECK(c[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(c[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(dist(c, oracle) <= 1e-3);
}

TEST_CASE("capped box projection agrees with brute force on random points") {
  const auto capped = FeasibleSet::capped_box({0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}, 1.0);
  Rng rng(5);
  for (int i = 0; i < 8; ++i) {
    const Vec p{rng.uniform(-1.0, 2.0), rng.uniform(-1.0, 2.0)};
    const Vec x = project(capped, p);
    CHECK(contains(capped, x, 1e-12));
    // Grid optimum can beat the exact projection by at most the grid spacing.
    CHECK(dist(x, p) <= dist(brute_capped_projection(p, 2e-3), p) + 1e-12);
    CHECK(dist(x, p) >= dist(brute_capped_projection(p, 2e-3), p) - 2e-3);
  }
}

TEST_CASE("projection is idempotent and nonexpansive") {
  const std::vector<FeasibleSet> sets{FeasibleSet::box({-1.0, 0.0, 2.0}, {1.0, 0.5, 3.0}),
                                      FeasibleSet::ball({1.0, -1.0, 0.0}, 2.0),
                                      FeasibleSet::capped_box({0.0, 0.0, 0.0}, {1.0, 2.0, 1.0}, {1.0, 0.5, 2.0}, 1.5)};
  Rng rng(11);
  for (const auto& s : sets)
    for (int i = 0; i < 200; ++i) {
      Vec a(3), b(3);
      for (auto& v : a) v = rng.uniform(-4.0, 4.0);
      for (auto& v : b) v = rng.uniform(-4.0, 4.0);
      const Vec pa = project(s, a);
      const Vec pb = project(s, b);
      CHECK(project(s, pa) == pa);
      CHECK(contains(s, pa));
      CHECK(dist(pa, pb) <= dist(a, b) + 1e-12);
    }
}

TEST_CASE("empty sets are configuration errors") {
  CHECK_THROWS_AS(FeasibleSet::box({1.0}, {0.0}), ConfigError);
  CHECK_THROWS_AS(FeasibleSet::ball({0.0}, -1.0), ConfigError);
  CHECK_THROWS_AS(FeasibleSet::capped_box({1.0}, {2.0}, {1.0}, 0.5), ConfigError);
}

TEST_CASE("diameter examples") {
  CHECK(diameter(FeasibleSet::uniform_box(2, -1.0, 1.0)) == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(diameter(FeasibleSet::ball({0.0, 0.0}, 1.0)) == doctest::Approx(2.0));
  CHECK(diameter(FeasibleSet::uniform_box(4, 0.0, 0.0)) == 0.0);
}

TEST_CASE("samples lie in the set") {
  Rng rng(3);
  const auto capped = FeasibleSet::capped_box({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, 0.5);
  const auto ball = FeasibleSet::ball({2.0, 0.0, 0.0}, 0.5);
  for (int i = 0; i < 500; ++i) {
    CHECK(contains(capped, sample_uniform(capped, rng)));
    CHECK(contains(ball, sample_uniform(ball, rng)));
  }
}

TEST_CASE("assumption bound check examples") {
  const auto box = FeasibleSet::uniform_box(2, -1.0, 1.0);
  AssumptionConstants c;
  c.F = c.G = 1.0;
  c.R = diameter(box);
  {
    const auto inst = constant_instance(LossOracle::zero(2), ConstraintOracle::zero(1, 2), box, c, 5);
    const auto r = check_assumption_bounds(inst, 32, 1);
    CHECK(r.ok());
    CHECK(r.max_abs_f == 0.0);
    CHECK(r.max_g_norm == 0.0);
    CHECK(r.max_grad_f == 0.0);
  }
  {
    c.F = 0.1;
    const auto inst = constant_instance(LossOracle::linear({0.0, 0.0}, 1.0), ConstraintOracle::zero(1, 2), box, c, 5);
    const auto r = check_assumption_bounds(inst, 32, 1);
    CHECK(r.flag_F);
    CHECK_FALSE(r.flag_G);
  }
  {
    OrrConfig oc;
    oc.horizon = 300;
    const auto r = check_assumption_bounds(orr_generate(oc), 64, 2);
    CHECK(r.ok());
  }
}

TEST_CASE("serial and parallel assumption checks agree exactly") {
  OrrConfig oc;
  oc.horizon = 200;
  oc.seed = 4;
  const auto inst = orr_generate(oc);
  const auto a = check_assumption_bounds(inst, 40, 9);
  const auto b = check_assumption_bounds_serial(inst, 40, 9);
  CHECK(a.max_abs_f == b.max_abs_f);
  CHECK(a.max_g_norm == b.max_g_norm);
  CHECK(a.max_grad_f == b.max_grad_f);
  CHECK(a.max_grad_g == b.max_grad_g);
  CHECK(a.max_lipschitz == b.max_lipschitz);
  CHECK(a.rounds_checked == b.rounds_checked);
}

TEST_CASE("round indices are 1-based and range checked") {
  OrrConfig oc;
  oc.horizon = 10;
  const auto inst = orr_generate(oc);
  CHECK_NOTHROW(inst.loss_at(1));
  CHECK_NOTHROW(inst.set_at(10));
  CHECK_THROWS(inst.loss_at(0));
  CHECK_THROWS(inst.constraints_at(11));
}
