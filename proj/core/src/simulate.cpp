#include "shmm/simulate.hpp"

#include "shmm/errors.hpp"
#include "shmm/parallel.hpp"
#include "shmm/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace shmm {

namespace {

void check_distribution(std::span<const double> w, const char* what) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw ModelError(std::string(what) + " has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-10) {
    throw ModelError(std::string(what) + " does not sum to 1");
  }
}

}  // namespace

std::vector<int> simulate_chain(const Eigen::Ref<const RowMatrix>& Q,
                                const Eigen::VectorXd& pi, std::size_t n,
                                Rng& rng) {
  const auto K = Q.rows();
  if (Q.cols() != K || pi.size() != K) {
    throw ModelError("transition matrix and initial law disagree in size");
  }
  check_distribution({pi.data(), static_cast<std::size_t>(K)}, "initial law");
  for (Eigen::Index k = 0; k < K; ++k) {
    check_distribution({Q.row(k).data(), static_cast<std::size_t>(K)},
                       "transition row");
  }
  std::vector<int> path(n);
  if (n == 0) return path;
  path[0] = rng.categorical({pi.data(), static_cast<std::size_t>(K)});
  for (std::size_t t = 1; t < n; ++t) {
    path[t] = rng.categorical(
        {Q.row(path[t - 1]).data(), static_cast<std::size_t>(K)});
  }
  return path;
}

SimulatedSeries simulate_with_states(const ModelParams& params, std::size_t n,
                                     Rng& rng, int first_day) {
  require_valid(params);
  const auto& h = params.hyper;
  const int M = h.M;
  const RowMatrix scales = scale_table(params);
  const Eigen::VectorXd pi = stationary_distribution(params.Q);

  SimulatedSeries out;
  out.states = simulate_chain(params.Q, pi, n, rng);
  auto& s = out.series;
  s.values.resize(n);
  s.day_of_year.resize(n);
  const bool discretized = h.mode == EmissionMode::Discretized;
  const double r = h.resolution;
  const long long inv_r = std::llround(1.0 / r);
  const bool exact_grid = std::abs(1.0 / r - static_cast<double>(inv_r)) < 1e-9;

  for (std::size_t t = 0; t < n; ++t) {
    const int doy = reduce_day(first_day + static_cast<long long>(t), h.T);
    s.day_of_year[t] = doy;
    const int k = out.states[t];
    const int m = rng.categorical({params.p.row(k).data(), static_cast<std::size_t>(M)});
    if (m == 0) {
      s.values[t] = 0.0;
      continue;
    }
    const double rate = params.lambda(k, m - 1) / scales(k, doy - 1);
    const double e = rng.exponential();
    if (discretized) {
      // Geometric by inversion: P(J >= j) = e^{-r ρ j}.
      const auto j = static_cast<long long>(std::floor(e / (rate * r)));
      s.values[t] = exact_grid ? static_cast<double>(j) / static_cast<double>(inv_r)
                               : static_cast<double>(j) * r;
    } else {
      s.values[t] = e / rate;
    }
  }
  return out;
}

SeriesData simulate_series(const ModelParams& params, std::size_t n,
                           std::uint64_t seed, int first_day) {
  Rng rng(seed);
  return simulate_with_states(params, n, rng, first_day).series;
}

SimulationBatch bootstrap_ensemble(const ModelParams& params, std::size_t n,
                                   std::size_t count, std::uint64_t seed,
                                   int jobs, int first_day) {
  if (count < 1) throw std::invalid_argument("ensemble count must be >= 1");
  require_valid(params);
  SimulationBatch batch;
  batch.seed = seed;
  batch.T = params.hyper.T;
  batch.params_used = params;
  batch.series.resize(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    batch.series[i] = simulate_with_states(params, n, rng, first_day).series;
  });
  return batch;
}

}  // namespace shmm
