#include "bench_common.hpp"

#include <shmm/simulate.hpp>
#include <shmm/spectral.hpp>
#include <shmm/stats.hpp>

#include <benchmark/benchmark.h>

#include <thread>

namespace shmm {
namespace {

void BM_SimulateSeries(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_series(m, 24090, ++seed));
  state.SetItemsProcessed(state.iterations() * 24090);
}
BENCHMARK(BM_SimulateSeries)->Unit(benchmark::kMillisecond);

void BM_BootstrapEnsemble(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_ensemble(m, 3650, 100, 9, jobs));
  state.SetItemsProcessed(state.iterations() * 3650 * 100);
}
BENCHMARK(BM_BootstrapEnsemble)->Unit(benchmark::kMillisecond);

void BM_DailyMoments(benchmark::State& state) {
  const SeriesData s = simulate_series(bench::station_model(), 24090, 3);
  for (auto _ : state) benchmark::DoNotOptimize(daily_moments(s, 365));
}
BENCHMARK(BM_DailyMoments)->Unit(benchmark::kMicrosecond);

void BM_ExactMoments(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  const BasisSpec b = build_basis(static_cast<int>(state.range(0)), default_y_max(m));
  for (auto _ : state) benchmark::DoNotOptimize(exact_moments(m, 100, b));
}
BENCHMARK(BM_ExactMoments)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_SpectralRecover(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  const BasisSpec b = build_basis(16, default_y_max(m));
  const MomentSet at = exact_moments(m, 100, b), next = exact_moments(m, 101, b);
  for (auto _ : state) benchmark::DoNotOptimize(spectral_recover(at, next, 4));
}
BENCHMARK(BM_SpectralRecover)->Unit(benchmark::kMicrosecond);

void BM_EmpiricalMoments(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  const SeriesData s = simulate_series(m, 24090, 4);
  const BasisSpec b = build_basis(16, 20.0);
  for (auto _ : state) benchmark::DoNotOptimize(empirical_moments(s, 100, b));
}
BENCHMARK(BM_EmpiricalMoments)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace shmm
