#include "shmm/errors.hpp"
#include "shmm/inference.hpp"
#include "shmm/parallel.hpp"
#include "shmm/rng.hpp"

#include <algorithm>
#include <cmath>

namespace shmm {

ModelParams random_initialization(const HyperParams& hyper, Rng& rng) {
  ModelParams params = ModelParams::zeros(hyper);
  const int K = hyper.K;
  const int M = hyper.M;
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < K; ++l) {
      params.Q(k, l) = rng.uniform() + (k == l ? 2.0 : 0.0);
    }
    params.Q.row(k) /= params.Q.row(k).sum();
  }
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < M; ++m) params.p(k, m) = rng.exponential();
    params.p.row(k) /= params.p.row(k).sum();
  }
  const double lo = std::log(0.05);
  const double hi = std::log(20.0);
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < M - 1; ++m) {
      params.lambda(k, m) = std::exp(lo + (hi - lo) * rng.uniform());
    }
    auto row = params.lambda.row(k);
    std::sort(row.begin(), row.end());
  }
  return params;
}

RestartResult em_run(const SeriesData& data, const ModelParams& start,
                     const Eigen::VectorXd& start_initial,
                     const EMConfig& config) {
  RestartResult res;
  res.params = start;
  res.initial = start_initial;
  try {
    require_valid(start);
    for (int iter = 0;; ++iter) {
      const PosteriorSet post = e_step(res.params, data, res.initial);
      res.loglik_trace.push_back(post.loglik);
      if (iter > 0) {
        const double prev = res.loglik_trace[res.loglik_trace.size() - 2];
        const double rel = (post.loglik - prev) / std::max(std::abs(prev), 1e-300);
        if (rel < config.epsilon) {
          res.converged = true;
          break;
        }
      }
      if (iter >= config.max_iters) break;

      const ClosedFormUpdate closed = m_step_closed(post);
      const EmissionUpdate em =
          m_step_emission(post, data, res.params, config.optimizer);
      if (em.optimizer_failed ||
          std::none_of(em.accepted.begin(), em.accepted.end(),
                       [](bool a) { return a; })) {
        ++res.null_emission_steps;
      }
      res.params.Q = closed.Q;
      res.params.p = closed.p;
      res.params.lambda = em.lambda;
      res.params.beta = em.beta;
      res.initial = closed.initial;
      ++res.iterations;
    }
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  return res;
}

FitReport em_fit(const SeriesData& data, const HyperParams& hyper,
                 const EMConfig& config, int jobs) {
  if (data.size() < 2) throw InputError("EM needs at least two observations");
  if (config.restarts < 1) throw FitError("at least one restart is required");
  check_series(data, hyper);

  std::vector<RestartResult> runs(static_cast<std::size_t>(config.restarts));
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    Rng rng = Rng::stream(config.seed, i);
    const ModelParams start = random_initialization(hyper, rng);
    const Eigen::VectorXd initial =
        Eigen::VectorXd::Constant(hyper.K, 1.0 / hyper.K);
    runs[i] = em_run(data, start, initial, config);
    runs[i].index = static_cast<int>(i);
  });

  int best = -1;
  for (int i = 0; i < config.restarts; ++i) {
    const auto& r = runs[static_cast<std::size_t>(i)];
    if (r.failed || r.loglik_trace.empty()) continue;
    if (best < 0 ||
        r.loglik_trace.back() >
            runs[static_cast<std::size_t>(best)].loglik_trace.back()) {
      best = i;
    }
  }
  if (best < 0) {
    std::string msg = "all " + std::to_string(config.restarts) +
                      " EM restarts failed";
    if (!runs.empty()) msg += "; restart 0: " + runs.front().error;
    throw FitError(msg);
  }

  const auto& winner = runs[static_cast<std::size_t>(best)];
  FitReport report;
  report.params = canonicalize(winner.params);
  report.loglik_trace = winner.loglik_trace;
  report.restarts = config.restarts;
  report.best_restart = best;
  report.iterations = winner.iterations;
  report.converged = winner.converged;
  report.seed = config.seed;
  report.runs = std::move(runs);
  return report;
}

}  // namespace shmm
