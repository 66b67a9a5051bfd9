// Serial reference loop against the OpenMP path loop on the same ensembles.
// Both produce identical numbers; only wall time differs.
#include "pathflow/flows.hpp"
#include "pathflow/harness.hpp"
#include "pathflow/parallel.hpp"
#include "pathflow/sde.hpp"
#include "pathflow/stats.hpp"

#include <benchmark/benchmark.h>

using namespace pathflow;

namespace {

double ensemble_mean(const MetricFlow& flow, double T, std::size_t n, const Execution& exec) {
  Vec x0(2);
  x0 << 0.2, 0.1;
  const Mat u0 = initial_frame(flow, x0);
  const auto values = map_paths<double>(n, exec, [&](std::size_t i) {
    const FramedPath p = simulate_path(flow, x0, u0, T, 100, RngKey{7, i});
    return p.x.back()[0];
  });
  return mc_reduce(values).mean;
}

void BM_OuEnsemble(benchmark::State& state, bool serial) {
  const auto flow = make_flow("ou", {{"dim", 2}, {"lambda", 1}});
  const double T = 1.0;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_mean(*flow, T, n, Execution{0, serial}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SphereEnsemble(benchmark::State& state, bool serial) {
  const auto flow = make_flow("shrinking-sphere", {{"r0", 2}, {"rate", 0.2}});
  const double T = 0.5;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_mean(*flow, T, n, Execution{0, serial}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SmokeScenario(benchmark::State& state, bool serial) {
  const Scenario s = builtin_scenario("smoke");
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(s, Execution{0, serial}).pass());
}

}  // namespace

BENCHMARK_CAPTURE(BM_OuEnsemble, serial, true)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_OuEnsemble, openmp, false)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SphereEnsemble, serial, true)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SphereEnsemble, openmp, false)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SmokeScenario, serial, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SmokeScenario, openmp, false)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
