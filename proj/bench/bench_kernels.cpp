// Serial reference vs OpenMP kernels.
#include <benchmark/benchmark.h>

#include "vqoco/environments.hpp"
#include "vqoco/metrics.hpp"
#include "vqoco/subsolvers.hpp"

namespace {

const vqoco::ProblemInstance& network() {
  static const vqoco::ProblemInstance inst = [] {
    vqoco::NetworkConfig c;
    c.J = 4;
    c.K = 3;
    c.horizon = 256;
    c.seed = 7;
    return vqoco::network_instance(c);
  }();
  return inst;
}

const vqoco::ProblemInstance& jobs() {
  static const vqoco::ProblemInstance inst = [] {
    vqoco::JobSchedConfig c;
    c.num_jobs = 12;
    c.horizon = 256;
    c.seed = 3;
    return vqoco::jobsched_instance(c);
  }();
  return inst;
}

void BM_SupDeviation(benchmark::State& state) {
  const auto& inst = network();
  const bool parallel = state.range(1) != 0;
  const int samples = static_cast<int>(state.range(0));
  for (auto _ : state) {
    double v = parallel ? vqoco::estimate_sup_deviation(inst.constraints_at(2), inst.constraints_at(1), inst.set_at(2),
                                                        samples, 11)
                        : vqoco::estimate_sup_deviation_serial(inst.constraints_at(2), inst.constraints_at(1),
                                                               inst.set_at(2), samples, 11);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * samples);
}
BENCHMARK(BM_SupDeviation)->ArgNames({"samples", "omp"})->Args({4096, 0})->Args({4096, 1})->Args({65536, 0})->Args({65536, 1});

// jobsched has no analytic V_g, so this exercises the sampled path.
void BM_FunctionVariation(benchmark::State& state) {
  const auto& inst = jobs();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto v = parallel ? vqoco::function_variation(inst, 64, 5) : vqoco::function_variation_serial(inst, 64, 5);
    benchmark::DoNotOptimize(v.value);
  }
}
BENCHMARK(BM_FunctionVariation)->ArgName("omp")->Arg(0)->Arg(1);

void BM_AssumptionBounds(benchmark::State& state) {
  const auto& inst = network();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto r = parallel ? vqoco::check_assumption_bounds(inst, 128, 9) : vqoco::check_assumption_bounds_serial(inst, 128, 9);
    benchmark::DoNotOptimize(r.max_abs_f);
  }
}
BENCHMARK(BM_AssumptionBounds)->ArgName("omp")->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
