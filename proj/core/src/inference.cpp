#include "shmm/inference.hpp"

#include "shmm/errors.hpp"
#include "shmm/optimize.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace shmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd resolve_initial(const ModelParams& params,
                                const InitialLaw& init) {
  if (!init) return stationary_distribution(params.Q);
  if (init->size() != params.K()) {
    throw ModelError("initial law has " + std::to_string(init->size()) +
                     " entries, expected " + std::to_string(params.K()));
  }
  return *init;
}

void require_nonempty(const SeriesData& data) {
  if (data.empty()) throw InputError("empty series");
}

// Scaled forward pass. Row t of `alpha` is P(X_t | Y_1..t); log_c(t) holds
// the log normalizer.
void forward_pass(const ModelParams& params, const RowMatrix& density,
                  const Eigen::VectorXd& initial, RowMatrix& alpha,
                  Eigen::VectorXd& log_c) {
  const Eigen::Index n = density.rows();
  const Eigen::Index K = density.cols();
  alpha.resize(n, K);
  log_c.resize(n);
  Eigen::RowVectorXd a(K);
  for (Eigen::Index t = 0; t < n; ++t) {
    if (t == 0) {
      a = initial.transpose().cwiseProduct(density.row(0));
    } else {
      a = (alpha.row(t - 1) * params.Q).cwiseProduct(density.row(t));
    }
    const double c = a.sum();
    if (!(c > 0.0)) throw DegenerateLikelihood(static_cast<std::size_t>(t));
    alpha.row(t) = a / c;
    log_c(t) = std::log(c);
  }
}

}  // namespace

EmissionTable emission_table(const ModelParams& params,
                             const SeriesData& data) {
  check_series(data, params.hyper);
  const int K = params.K();
  const int M = params.M();
  const auto n = static_cast<Eigen::Index>(data.size());
  const RowMatrix scales = scale_table(params);
  EmissionTable out;
  out.density.resize(n, K);
  out.components = Tensor3(n, K, M);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double y = data.values[static_cast<std::size_t>(t)];
    const int doy = data.day_of_year[static_cast<std::size_t>(t)];
    for (int k = 0; k < K; ++k) {
      double* comp = &out.components(t, k, 0);
      weighted_components(y, k, scales(k, doy - 1), params,
                          {comp, static_cast<std::size_t>(M)});
      double sum = 0.0;
      for (int m = 0; m < M; ++m) sum += comp[m];
      out.density(t, k) = sum;
    }
  }
  return out;
}

Eigen::VectorXd forward_log_normalizers(const ModelParams& params,
                                        const SeriesData& data,
                                        const InitialLaw& init) {
  require_nonempty(data);
  const EmissionTable table = emission_table(params, data);
  RowMatrix alpha;
  Eigen::VectorXd log_c;
  forward_pass(params, table.density, resolve_initial(params, init), alpha,
               log_c);
  return log_c;
}

double log_likelihood(const ModelParams& params, const SeriesData& data,
                      const InitialLaw& init) {
  return forward_log_normalizers(params, data, init).sum();
}

double log_likelihood_backward(const ModelParams& params,
                               const SeriesData& data,
                               const InitialLaw& init) {
  require_nonempty(data);
  const EmissionTable table = emission_table(params, data);
  const Eigen::VectorXd initial = resolve_initial(params, init);
  const Eigen::Index n = table.density.rows();
  const Eigen::Index K = table.density.cols();
  // b_t(k) ∝ P(Y_{t+1..n} | X_t = k), renormalized at every step.
  Eigen::VectorXd b = Eigen::VectorXd::Ones(K);
  double log_scale = 0.0;
  for (Eigen::Index t = n - 1; t >= 1; --t) {
    const Eigen::VectorXd fb =
        table.density.row(t).transpose().cwiseProduct(b);
    b = params.Q * fb;
    const double d = b.sum();
    if (!(d > 0.0)) throw DegenerateLikelihood(static_cast<std::size_t>(t));
    b /= d;
    log_scale += std::log(d);
  }
  const double last =
      initial.cwiseProduct(table.density.row(0).transpose()).dot(b);
  if (!(last > 0.0)) throw DegenerateLikelihood(0);
  return log_scale + std::log(last);
}

PosteriorSet e_step(const ModelParams& params, const SeriesData& data,
                    const InitialLaw& init) {
  require_nonempty(data);
  const EmissionTable table = emission_table(params, data);
  const Eigen::VectorXd initial = resolve_initial(params, init);
  const Eigen::Index n = table.density.rows();
  const int K = params.K();
  const int M = params.M();

  RowMatrix alpha;
  Eigen::VectorXd log_c;
  forward_pass(params, table.density, initial, alpha, log_c);

  PosteriorSet post;
  post.loglik = log_c.sum();
  post.smoothing.resize(n, K);
  post.pair_smoothing = Tensor3(n > 0 ? n - 1 : 0, K, K);
  post.responsibilities = Tensor3(n, K, M);

  Eigen::RowVectorXd beta = Eigen::RowVectorXd::Ones(K);
  post.smoothing.row(n - 1) = alpha.row(n - 1);
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    const double c_next = std::exp(log_c(t + 1));
    const Eigen::RowVectorXd fb = table.density.row(t + 1).cwiseProduct(beta);
    double pair_total = 0.0;
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < K; ++l) {
        const double v = alpha(t, k) * params.Q(k, l) * fb(l) / c_next;
        post.pair_smoothing(t, k, l) = v;
        pair_total += v;
      }
    }
    if (pair_total > 0.0) {
      for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l) post.pair_smoothing(t, k, l) /= pair_total;
    }
    beta = (params.Q * fb.transpose()).transpose() / c_next;
    Eigen::RowVectorXd s = alpha.row(t).cwiseProduct(beta);
    post.smoothing.row(t) = s / s.sum();
  }

  for (Eigen::Index t = 0; t < n; ++t) {
    for (int k = 0; k < K; ++k) {
      const double dens = table.density(t, k);
      const double w = post.smoothing(t, k);
      for (int m = 0; m < M; ++m) {
        post.responsibilities(t, k, m) =
            dens > 0.0 ? w * table.components(t, k, m) / dens : 0.0;
      }
    }
  }
  return post;
}

ClosedFormUpdate m_step_closed(const PosteriorSet& post) {
  const Eigen::Index n = post.smoothing.rows();
  const Eigen::Index K = post.smoothing.cols();
  const Eigen::Index M = post.responsibilities.d2;
  ClosedFormUpdate out;
  out.initial = post.smoothing.row(0).transpose();
  out.initial /= out.initial.sum();

  const Eigen::VectorXd occupancy = post.smoothing.colwise().sum().transpose();
  for (Eigen::Index k = 0; k < K; ++k) {
    if (occupancy(k) < 1e-12) throw ZeroOccupancy(static_cast<int>(k));
  }

  out.Q = RowMatrix::Zero(K, K);
  for (Eigen::Index t = 0; t + 1 < n; ++t)
    for (Eigen::Index k = 0; k < K; ++k)
      for (Eigen::Index l = 0; l < K; ++l)
        out.Q(k, l) += post.pair_smoothing(t, k, l);
  for (Eigen::Index k = 0; k < K; ++k) {
    // Row sums equal Σ_{t<n} π_{t|n}(k); a state seen only at t = n has no
    // observed transitions and gets a uniform row.
    const double total = out.Q.row(k).sum();
    if (total > 0.0) {
      out.Q.row(k) /= total;
    } else {
      out.Q.row(k).setConstant(1.0 / static_cast<double>(K));
    }
  }

  out.p = RowMatrix::Zero(K, M);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index k = 0; k < K; ++k)
      for (Eigen::Index m = 0; m < M; ++m)
        out.p(k, m) += post.responsibilities(t, k, m);
  for (Eigen::Index k = 0; k < K; ++k) out.p.row(k) /= out.p.row(k).sum();
  return out;
}

EmissionStats emission_stats(const PosteriorSet& post, const SeriesData& data,
                             int k, const HyperParams& hyper) {
  const int C = hyper.M - 1;
  EmissionStats s{RowMatrix::Zero(hyper.T, C), RowMatrix::Zero(hyper.T, C)};
  const auto n = static_cast<Eigen::Index>(data.size());
  for (Eigen::Index t = 0; t < n; ++t) {
    const int row = data.day_of_year[static_cast<std::size_t>(t)] - 1;
    const double y = data.values[static_cast<std::size_t>(t)];
    for (int m = 0; m < C; ++m) {
      const double g = post.responsibilities(t, k, m + 1);
      s.weight(row, m) += g;
      s.weighted_sum(row, m) += g * y;
    }
  }
  return s;
}

EmissionUpdate m_step_emission(const PosteriorSet& post, const SeriesData& data,
                               const ModelParams& prev,
                               const OptimizerConfig& config) {
  const HyperParams& h = prev.hyper;
  const int K = h.K;
  const int C = h.M - 1;
  const int B = 2 * h.d;
  const bool discretized = h.mode == EmissionMode::Discretized;
  const double log_lo = std::log(1e-8);
  const double log_hi = std::log(1e8);

  EmissionUpdate out;
  out.lambda = prev.lambda;
  out.beta = prev.beta;
  out.accepted.assign(static_cast<std::size_t>(K), false);
  out.objective_before.resize(K);
  out.objective_after.resize(K);

  opt::Options opts;
  opts.max_evals = config.max_evals;

  for (int k = 0; k < K; ++k) {
    const EmissionObjective obj(emission_stats(post, data, k, h), h);
    const std::span<const double> lam0(prev.lambda.data() + k * C,
                                       static_cast<std::size_t>(C));
    const std::span<const double> beta0(prev.beta.data() + k * B,
                                        static_cast<std::size_t>(B));
    const double before = obj.value(lam0, beta0);
    out.objective_before(k) = before;
    out.objective_after(k) = before;

    // β is only optimized when the start lies strictly inside the barrier.
    const bool move_beta =
        B > 0 && std::isfinite(obj.log_barrier(beta0, config.scale_floor));

    Eigen::VectorXd lam_new =
        Eigen::Map<const Eigen::VectorXd>(lam0.data(), C);
    Eigen::VectorXd beta_new =
        Eigen::Map<const Eigen::VectorXd>(beta0.data(), B);

    try {
      if (!discretized) {
        if (move_beta) {
          opt::Objective f = [&](const Eigen::VectorXd& b,
                                 Eigen::VectorXd& g) -> double {
            const std::span<const double> bs(b.data(),
                                             static_cast<std::size_t>(B));
            Eigen::VectorXd gb;
            const double barrier = obj.log_barrier(bs, config.scale_floor, &gb);
            if (!std::isfinite(barrier)) return kInf;
            const Eigen::VectorXd lam = obj.profile_lambda(bs, lam0);
            Eigen::VectorXd theta(C + B);
            theta << lam.array().log().matrix(), b;
            Eigen::VectorXd gt;
            const double v = obj.value_and_gradient(theta, &gt);
            if (!std::isfinite(v)) return kInf;
            // Profiled λ is stationary, so only the explicit β gradient enters.
            g = -(gt.tail(B) + config.barrier_weight * gb);
            return -(v + config.barrier_weight * barrier);
          };
          const opt::Result r = minimize_bfgs(f, beta_new, opts);
          if (!std::isfinite(r.value)) {
            out.optimizer_failed = true;
          } else {
            beta_new = r.x;
          }
        }
        lam_new = obj.profile_lambda(
            {beta_new.data(), static_cast<std::size_t>(B)}, lam0);
      } else {
        const int P = C + (move_beta ? B : 0);
        opt::Objective f = [&](const Eigen::VectorXd& x,
                               Eigen::VectorXd& g) -> double {
          for (int m = 0; m < C; ++m)
            if (!(x(m) >= log_lo && x(m) <= log_hi)) return kInf;
          Eigen::VectorXd theta(C + B);
          theta.head(C) = x.head(C);
          theta.tail(B) = move_beta ? Eigen::VectorXd(x.tail(B)) : beta_new;
          double barrier = 0.0;
          Eigen::VectorXd gb = Eigen::VectorXd::Zero(B);
          if (move_beta) {
            barrier = obj.log_barrier(
                {theta.data() + C, static_cast<std::size_t>(B)},
                config.scale_floor, &gb);
            if (!std::isfinite(barrier)) return kInf;
          }
          Eigen::VectorXd gt;
          const double v = obj.value_and_gradient(theta, &gt);
          if (!std::isfinite(v)) return kInf;
          g.resize(P);
          g.head(C) = -gt.head(C);
          if (move_beta) g.tail(B) = -(gt.tail(B) + config.barrier_weight * gb);
          return -(v + config.barrier_weight * barrier);
        };
        Eigen::VectorXd x0(P);
        x0.head(C) = lam_new.array().log().matrix();
        if (move_beta) x0.tail(B) = beta_new;
        const opt::Result r = minimize_bfgs(f, x0, opts);
        if (!std::isfinite(r.value)) {
          out.optimizer_failed = true;
        } else {
          lam_new = r.x.head(C).array().exp().matrix();
          if (move_beta) beta_new = r.x.tail(B);
        }
      }
    } catch (const std::exception&) {
      out.optimizer_failed = true;
      continue;
    }

    const std::span<const double> lam_span(lam_new.data(),
                                           static_cast<std::size_t>(C));
    const std::span<const double> beta_span(beta_new.data(),
                                            static_cast<std::size_t>(B));
    const double after = obj.value(lam_span, beta_span);
    const bool feasible =
        lam_new.allFinite() && (lam_new.array() > 0.0).all() &&
        (B == 0 || obj.scales(beta_span).minCoeff() > 0.0);
    if (feasible && std::isfinite(after) && after >= before) {
      out.lambda.row(k) = lam_new.transpose();
      if (B > 0) out.beta.row(k) = beta_new.transpose();
      out.accepted[static_cast<std::size_t>(k)] = true;
      out.objective_after(k) = after;
    }
  }
  return out;
}

std::vector<int> viterbi(const ModelParams& params, const SeriesData& data,
                         const InitialLaw& init) {
  require_nonempty(data);
  const EmissionTable table = emission_table(params, data);
  const Eigen::VectorXd initial = resolve_initial(params, init);
  const Eigen::Index n = table.density.rows();
  const int K = params.K();
  const RowMatrix logQ = params.Q.array().log().matrix();
  const RowMatrix logf = table.density.array().log().matrix();

  Eigen::VectorXd delta(K), next(K);
  std::vector<int> back(static_cast<std::size_t>(n * K), 0);
  for (int k = 0; k < K; ++k) delta(k) = std::log(initial(k)) + logf(0, k);
  if (!std::isfinite(delta.maxCoeff())) throw DegenerateLikelihood(0);

  for (Eigen::Index t = 1; t < n; ++t) {
    for (int l = 0; l < K; ++l) {
      double best = -kInf;
      int arg = 0;
      for (int k = 0; k < K; ++k) {
        const double v = delta(k) + logQ(k, l);
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      next(l) = best + logf(t, l);
      back[static_cast<std::size_t>(t * K + l)] = arg;
    }
    if (!std::isfinite(next.maxCoeff()))
      throw DegenerateLikelihood(static_cast<std::size_t>(t));
    delta = next;
  }

  std::vector<int> path(static_cast<std::size_t>(n));
  int state = 0;
  for (int k = 1; k < K; ++k)
    if (delta(k) > delta(state)) state = k;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    path[static_cast<std::size_t>(t)] = state;
    if (t > 0) state = back[static_cast<std::size_t>(t * K + state)];
  }
  return path;
}

std::vector<int> map_states(const PosteriorSet& post) {
  const Eigen::Index n = post.smoothing.rows();
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    int best = 0;
    for (Eigen::Index k = 1; k < post.smoothing.cols(); ++k)
      if (post.smoothing(t, k) > post.smoothing(t, best))
        best = static_cast<int>(k);
    out[static_cast<std::size_t>(t)] = best;
  }
  return out;
}

}  // namespace shmm
