#include "bench_common.hpp"

#include <shmm/inference.hpp>
#include <shmm/rng.hpp>
#include <shmm/simulate.hpp>

#include <benchmark/benchmark.h>

namespace shmm {
namespace {

void BM_ForwardLogLikelihood(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  const SeriesData s = simulate_series(m, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(log_likelihood(m, s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardLogLikelihood)->Arg(3650)->Arg(24090)->Unit(benchmark::kMillisecond);

void BM_EStep(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  const SeriesData s = simulate_series(m, static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(e_step(m, s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EStep)->Arg(3650)->Arg(24090)->Unit(benchmark::kMillisecond);

void BM_EmIteration(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  const SeriesData s = simulate_series(m, 24090, 3);
  Rng rng(4);
  const ModelParams start = random_initialization(m.hyper, rng);
  EMConfig cfg;
  cfg.max_iters = 1;
  cfg.epsilon = 0.0;
  const Eigen::VectorXd init = Eigen::VectorXd::Constant(4, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(em_run(s, start, init, cfg));
}
BENCHMARK(BM_EmIteration)->Unit(benchmark::kMillisecond);

void BM_Viterbi(benchmark::State& state) {
  const ModelParams m = bench::station_model();
  const SeriesData s = simulate_series(m, static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(m, s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Viterbi)->Arg(3650)->Arg(24090)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace shmm
