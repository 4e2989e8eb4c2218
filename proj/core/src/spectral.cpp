#include "shmm/spectral.hpp"

#include "shmm/errors.hpp"
#include "shmm/permutation.hpp"
#include "shmm/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace shmm {

namespace {

long long grid_count(double y_max, double r) {
  return static_cast<long long>(std::floor(y_max / r + 1e-9));
}

}  // namespace

// --- basis -------------------------------------------------------------------

int BasisSpec::index_of(double y) const {
  if (y <= 0.0) return 0;
  if (y > y_max * (1.0 + 1e-12)) return -1;
  const double h = width();
  const auto j = static_cast<int>(std::ceil(y / h - 1e-9));
  return std::clamp(j, 1, N - 1);
}

Eigen::VectorXd BasisSpec::features(double y) const {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(N);
  const int a = index_of(y);
  if (a == 0) {
    phi(0) = 1.0;
  } else if (a > 0) {
    phi(a) = 1.0 / std::sqrt(width());
  }
  return phi;
}

BasisSpec build_basis(int N, double y_max) {
  if (N < 2) throw std::invalid_argument("basis size must be at least 2");
  if (!(y_max > 0.0) || !std::isfinite(y_max)) {
    throw std::invalid_argument("basis cutoff must be positive");
  }
  BasisSpec b;
  b.N = N;
  b.y_max = y_max;
  b.edges.resize(static_cast<std::size_t>(N));
  const double h = y_max / (N - 1);
  for (int j = 0; j < N; ++j) b.edges[static_cast<std::size_t>(j)] = h * j;
  b.edges.back() = y_max;
  return b;
}

Eigen::MatrixXd gram_matrix(const BasisSpec& basis) {
  const int N = basis.N;
  const double h = basis.width();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, N);
  G(0, 0) = 1.0;  // δ0 mass of 1{0}²
  for (int a = 1; a < N; ++a) {
    for (int b = 1; b < N; ++b) {
      const double lo = std::max(basis.edges[a - 1], basis.edges[b - 1]);
      const double hi = std::min(basis.edges[a], basis.edges[b]);
      G(a, b) = std::max(0.0, hi - lo) / h;
    }
  }
  return G;
}

double default_y_max(const ModelParams& params) {
  const RowMatrix s = scale_table(params);
  double min_rate = std::numeric_limits<double>::infinity();
  for (int k = 0; k < params.K(); ++k) {
    const double smax = s.row(k).maxCoeff();
    for (int m = 0; m < params.M() - 1; ++m) {
      min_rate = std::min(min_rate, params.lambda(k, m) / smax);
    }
  }
  return 10.0 / min_rate;
}

Eigen::MatrixXd emission_projection(const ModelParams& params, long long t,
                                    const BasisSpec& basis) {
  const int K = params.K();
  const int M = params.M();
  const int N = basis.N;
  const double inv_sqrt_h = 1.0 / std::sqrt(basis.width());
  Eigen::MatrixXd O = Eigen::MatrixXd::Zero(N, K);
  for (int k = 0; k < K; ++k) {
    const double s = seasonal_scale(t, params.beta_row(k), params.hyper);
    O(0, k) = params.p(k, 0);
    if (params.hyper.mode == EmissionMode::Continuous) {
      for (int m = 1; m < M; ++m) {
        const double rate = params.lambda(k, m - 1) / s;
        for (int a = 1; a < N; ++a) {
          const double lo = basis.edges[static_cast<std::size_t>(a - 1)];
          const double hi = basis.edges[static_cast<std::size_t>(a)];
          // e^{-ρ lo} - e^{-ρ hi}, written to keep relative accuracy
          O(a, k) += params.p(k, m) * std::exp(-rate * lo) *
                     -std::expm1(-rate * (hi - lo)) * inv_sqrt_h;
        }
      }
    } else {
      const double r = params.hyper.resolution;
      const long long J = grid_count(basis.y_max, r);
      for (int m = 1; m < M; ++m) {
        const double rate = params.lambda(k, m - 1) / s;
        const double alpha = -std::expm1(-r * rate);
        O(0, k) += params.p(k, m) * alpha;
        for (long long j = 1; j <= J; ++j) {
          const double y = r * static_cast<double>(j);
          const int a = basis.index_of(y);
          if (a <= 0) continue;
          O(a, k) += params.p(k, m) * alpha * std::exp(-rate * y) * inv_sqrt_h;
        }
      }
    }
  }
  return O;
}

// --- moments -----------------------------------------------------------------

MomentSet exact_moments(const ModelParams& params, long long t,
                        const BasisSpec& basis) {
  const int K = params.K();
  const int N = basis.N;
  const int T = params.hyper.T;
  const Eigen::MatrixXd Op = emission_projection(params, reduce_day(t - 1, T), basis);
  const Eigen::MatrixXd Ot = emission_projection(params, reduce_day(t, T), basis);
  const Eigen::MatrixXd On = emission_projection(params, reduce_day(t + 1, T), basis);
  const Eigen::VectorXd pi = stationary_distribution(params.Q);
  const RowMatrix& Q = params.Q;

  MomentSet ms;
  ms.t = reduce_day(t, T);
  ms.L = Eigen::VectorXd::Zero(N);
  ms.N2 = Eigen::MatrixXd::Zero(N, N);
  ms.P2 = Eigen::MatrixXd::Zero(N, N);
  ms.M3.assign(static_cast<std::size_t>(N), Eigen::MatrixXd::Zero(N, N));

  for (int a = 0; a < N; ++a)
    for (int k = 0; k < K; ++k) ms.L(a) += pi(k) * Ot(a, k);

  // Sums over the hidden path (i, j, l) at days (t-1, t, t+1).
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      for (int l = 0; l < K; ++l) {
        const double w = pi(i) * Q(i, j) * Q(j, l);
        for (int a = 0; a < N; ++a) {
          const double wa = w * Op(a, i);
          for (int c = 0; c < N; ++c) {
            const double wac = wa * On(c, l);
            ms.P2(a, c) += wac;
            for (int b = 0; b < N; ++b) {
              ms.M3[static_cast<std::size_t>(b)](a, c) += wac * Ot(b, j);
            }
          }
        }
      }
    }
  }
  for (int j = 0; j < K; ++j)
    for (int l = 0; l < K; ++l)
      for (int a = 0; a < N; ++a)
        for (int c = 0; c < N; ++c)
          ms.N2(a, c) += pi(j) * Q(j, l) * Ot(a, j) * On(c, l);
  return ms;
}

double MomentResiduals::max() const {
  return std::max({L, M3, N2, P2});
}

MomentResiduals moment_equation_residuals(const MomentSet& moments,
                                          const ModelParams& params,
                                          const BasisSpec& basis) {
  const int T = params.hyper.T;
  const long long t = moments.t;
  const Eigen::MatrixXd Op = emission_projection(params, reduce_day(t - 1, T), basis);
  const Eigen::MatrixXd Ot = emission_projection(params, reduce_day(t, T), basis);
  const Eigen::MatrixXd On = emission_projection(params, reduce_day(t + 1, T), basis);
  const Eigen::VectorXd pi = stationary_distribution(params.Q);
  const Eigen::MatrixXd Q = params.Q;
  const Eigen::MatrixXd D = pi.asDiagonal();

  MomentResiduals r;
  r.L = (moments.L - Ot * pi).cwiseAbs().maxCoeff();
  r.N2 = (moments.N2 - Ot * D * Q * On.transpose()).cwiseAbs().maxCoeff();
  r.P2 = (moments.P2 - Op * D * Q * Q * On.transpose()).cwiseAbs().maxCoeff();
  for (int b = 0; b < basis.N; ++b) {
    const Eigen::MatrixXd expected = Op * D * Q *
                                     Ot.row(b).transpose().asDiagonal() * Q *
                                     On.transpose();
    r.M3 = std::max(r.M3, (moments.M3[static_cast<std::size_t>(b)] - expected)
                              .cwiseAbs()
                              .maxCoeff());
  }
  return r;
}

MomentSet empirical_moments(const SeriesData& series, int t,
                            const BasisSpec& basis) {
  const int N = basis.N;
  MomentSet ms;
  ms.t = t;
  ms.L = Eigen::VectorXd::Zero(N);
  ms.N2 = Eigen::MatrixXd::Zero(N, N);
  ms.P2 = Eigen::MatrixXd::Zero(N, N);
  ms.M3.assign(static_cast<std::size_t>(N), Eigen::MatrixXd::Zero(N, N));

  const std::size_t n = series.size();
  long long count = 0;
  for (std::size_t z = 1; z + 1 < n; ++z) {
    if (series.day_of_year[z] != t) continue;
    const int a = basis.index_of(series.values[z - 1]);
    const int b = basis.index_of(series.values[z]);
    const int c = basis.index_of(series.values[z + 1]);
    ++count;
    // Each φ vector has at most one nonzero entry.
    auto weight = [&](int idx) {
      return idx < 0 ? 0.0 : (idx == 0 ? 1.0 : 1.0 / std::sqrt(basis.width()));
    };
    const double wa = weight(a), wb = weight(b), wc = weight(c);
    if (b >= 0) ms.L(b) += wb;
    if (b >= 0 && c >= 0) ms.N2(b, c) += wb * wc;
    if (a >= 0 && c >= 0) ms.P2(a, c) += wa * wc;
    if (a >= 0 && b >= 0 && c >= 0) {
      ms.M3[static_cast<std::size_t>(b)](a, c) += wa * wb * wc;
    }
  }
  if (count == 0) {
    throw InputError("no observation triple centered on day " +
                     std::to_string(t));
  }
  const double inv = 1.0 / static_cast<double>(count);
  ms.L *= inv;
  ms.N2 *= inv;
  ms.P2 *= inv;
  for (auto& m : ms.M3) m *= inv;
  ms.replicates = count;
  return ms;
}

MomentSet empirical_moments(const RowMatrix& years, int t,
                            const BasisSpec& basis) {
  if (years.rows() == 0) throw InputError("empty replicate set");
  SeriesData s;
  const auto T = static_cast<int>(years.cols());
  s.values.reserve(static_cast<std::size_t>(years.size()));
  for (Eigen::Index i = 0; i < years.rows(); ++i) {
    for (int d = 1; d <= T; ++d) {
      s.values.push_back(years(i, d - 1));
      s.day_of_year.push_back(d);
    }
  }
  return empirical_moments(s, t, basis);
}

// --- recovery ----------------------------------------------------------------

namespace {

struct ObservationRecovery {
  Eigen::MatrixXd O;
  Eigen::MatrixXd U_tilde;  // top-K left singular vectors of N2
  Eigen::MatrixXd V;        // top-K right singular vectors of P2
  Eigen::MatrixXd probe;    // DiagProbe = Ũᵀ O
  Eigen::VectorXd singular_P2;
  Eigen::VectorXd singular_N2;
  double rank_tol = 0.0;
  int attempts = 0;
  double imag = 0.0;
  double gap = 0.0;
};

void check_rank(const Eigen::VectorXd& sv, int K, double rel_tol,
                const char* name, int t, double& abs_tol) {
  abs_tol = rel_tol * (sv.size() ? sv(0) : 0.0);
  if (sv.size() < K || !(sv(K - 1) > abs_tol)) {
    std::string msg = std::string(name) + " at day " + std::to_string(t) +
                      " has numerical rank below " + std::to_string(K) +
                      "; singular values:";
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      msg += " " + std::to_string(sv(i));
    }
    throw SpectralError(msg);
  }
}

ObservationRecovery recover_observation(const MomentSet& ms, int K,
                                        const SpectralOptions& opt) {
  const auto N = static_cast<int>(ms.L.size());
  if (K < 1 || K > N) throw SpectralError("K must lie in 1..N");
  ObservationRecovery rec;

  Eigen::JacobiSVD<Eigen::MatrixXd> svdP(ms.P2,
                                         Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::JacobiSVD<Eigen::MatrixXd> svdN(ms.N2, Eigen::ComputeFullU);
  rec.singular_P2 = svdP.singularValues();
  rec.singular_N2 = svdN.singularValues();
  double tolN = 0.0;
  check_rank(rec.singular_P2, K, opt.rank_tol, "P2", ms.t, rec.rank_tol);
  check_rank(rec.singular_N2, K, opt.rank_tol, "N2", ms.t, tolN);

  const Eigen::MatrixXd U = svdP.matrixU().leftCols(K);
  rec.V = svdP.matrixV().leftCols(K);
  rec.U_tilde = svdN.matrixU().leftCols(K);

  const Eigen::MatrixXd W = (U.transpose() * ms.P2 * rec.V).inverse();
  std::vector<Eigen::MatrixXd> B(static_cast<std::size_t>(N));
  for (int b = 0; b < N; ++b) {
    B[static_cast<std::size_t>(b)] =
        W * U.transpose() * ms.M3[static_cast<std::size_t>(b)] * rec.V;
  }
  std::vector<Eigen::MatrixXd> C(static_cast<std::size_t>(K),
                                 Eigen::MatrixXd::Zero(K, K));
  for (int k = 0; k < K; ++k)
    for (int b = 0; b < N; ++b)
      C[static_cast<std::size_t>(k)] += rec.U_tilde(b, k) * B[static_cast<std::size_t>(b)];

  Rng rng(opt.seed);
  std::string last_issue;
  for (int attempt = 1; attempt <= opt.max_attempts; ++attempt) {
    rec.attempts = attempt;
    Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(K, K);
    for (int k = 0; k < K; ++k) mix += rng.normal() * C[static_cast<std::size_t>(k)];
    Eigen::EigenSolver<Eigen::MatrixXd> es(mix);
    if (es.info() != Eigen::Success) {
      last_issue = "eigendecomposition did not converge";
      continue;
    }
    const Eigen::VectorXcd ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    rec.imag = ev.imag().cwiseAbs().maxCoeff() / scale;
    rec.gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < K; ++i)
      for (int j = i + 1; j < K; ++j)
        rec.gap = std::min(rec.gap, std::abs(ev(i) - ev(j)) / scale);
    if (rec.imag > 1e-8) {
      last_issue = "complex eigenvalues (imaginary part " +
                   std::to_string(rec.imag) + ")";
      continue;
    }
    if (rec.gap < 1e-10) {
      last_issue = "clustered eigenvalues (gap " + std::to_string(rec.gap) + ")";
      continue;
    }
    const Eigen::MatrixXd R = es.eigenvectors().real();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
    if (!lu.isInvertible()) {
      last_issue = "singular eigenvector matrix";
      continue;
    }
    const Eigen::MatrixXd Rinv = lu.inverse();
    rec.probe.resize(K, K);
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXd Dk = Rinv * C[static_cast<std::size_t>(k)] * R;
      for (int j = 0; j < K; ++j) rec.probe(k, j) = Dk(j, j);
    }
    rec.O = rec.U_tilde * rec.probe;
    return rec;
  }
  throw SpectralError("simultaneous diagonalization failed at day " +
                      std::to_string(ms.t) + " after " +
                      std::to_string(opt.max_attempts) + " attempts: " +
                      last_issue);
}

}  // namespace

Eigen::MatrixXd spectral_observation(const MomentSet& moments, int K,
                                     const SpectralOptions& options) {
  return recover_observation(moments, K, options).O;
}

SpectralEstimate spectral_recover(const MomentSet& at_t,
                                  const MomentSet& at_next, int K,
                                  const SpectralOptions& options) {
  if (at_t.L.size() != at_next.L.size()) {
    throw SpectralError("moment sets use different bases");
  }
  const ObservationRecovery cur = recover_observation(at_t, K, options);
  SpectralOptions next_opt = options;
  next_opt.seed = splitmix64(options.seed + 1);
  const ObservationRecovery nxt = recover_observation(at_next, K, next_opt);

  SpectralEstimate est;
  est.t = at_t.t;
  est.O_t = cur.O;
  auto& diag = est.diagnostics;
  diag.singular_P2 = cur.singular_P2;
  diag.singular_N2 = cur.singular_N2;
  diag.rank_tol = cur.rank_tol;
  diag.diagonalization_attempts = cur.attempts;
  diag.eigen_imag = cur.imag;
  diag.eigen_gap = cur.gap;

  const Eigen::MatrixXd probe_inv = cur.probe.inverse();
  Eigen::VectorXd pi = probe_inv * cur.U_tilde.transpose() * at_t.L;
  diag.pi_sum_error = std::abs(pi.sum() - 1.0);

  // Q with columns in the state order of the separately recovered O_{t+1}.
  const Eigen::MatrixXd lhs = cur.probe * pi.asDiagonal();
  const Eigen::MatrixXd right = (nxt.O.transpose() * cur.V).inverse();
  const Eigen::MatrixXd Q_raw =
      lhs.inverse() * cur.U_tilde.transpose() * at_t.N2 * cur.V * right;

  // Column j of Q_raw belongs to state τ(j). Stationarity gives
  // (π Q_raw)(j) = π(τ(j)); day-to-day similarity of O breaks ties.
  const Eigen::RowVectorXd u = pi.transpose() * Q_raw;
  Eigen::MatrixXd cost(K, K);
  for (int j = 0; j < K; ++j) {
    for (int i = 0; i < K; ++i) {
      cost(j, i) = std::abs(u(j) - pi(i)) +
                   (cur.O.col(i) - nxt.O.col(j)).cwiseAbs().sum();
    }
  }
  const std::vector<int> tau = best_assignment(cost);
  diag.next_day_alignment = tau;

  Eigen::MatrixXd Q(K, K);
  est.O_next.resize(nxt.O.rows(), K);
  for (int j = 0; j < K; ++j) {
    Q.col(tau[static_cast<std::size_t>(j)]) = Q_raw.col(j);
    est.O_next.col(tau[static_cast<std::size_t>(j)]) = nxt.O.col(j);
  }
  double row_err = 0.0;
  for (int k = 0; k < K; ++k) row_err = std::max(row_err, std::abs(Q.row(k).sum() - 1.0));
  diag.Q_row_sum_error = row_err;

  est.pi = pi;
  est.Q = Q;
  return est;
}

// --- seasonality -------------------------------------------------------------

SeasonalityFit recover_seasonality(std::span<const double> variances, int d) {
  const auto T = static_cast<int>(variances.size());
  if (T == 0) throw std::invalid_argument("no variances given");
  if (d < 0) throw std::invalid_argument("degree must be non-negative");
  for (int t = 0; t < T; ++t) {
    if (!(variances[static_cast<std::size_t>(t)] > 0.0)) {
      throw ModelError("non-positive variance at day " + std::to_string(t + 1));
    }
  }
  Eigen::MatrixXd X(T, 1 + 2 * d);
  Eigen::VectorXd y(T);
  for (int t = 1; t <= T; ++t) {
    X(t - 1, 0) = 1.0;
    if (d > 0) X.row(t - 1).tail(2 * d) = trig_regressors(t, d, T);
    y(t - 1) = std::sqrt(variances[static_cast<std::size_t>(t - 1)] / variances[0]);
  }
  const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(y);
  const double c = coef(0);
  SeasonalityFit fit;
  fit.beta = coef.tail(2 * d) / c;
  fit.scale.resize(T);
  for (int t = 1; t <= T; ++t) {
    fit.scale(t - 1) = (X.row(t - 1) * coef)(0) / c;
  }
  return fit;
}

std::vector<double> state_variances(const ModelParams& params, int k) {
  std::vector<double> v(static_cast<std::size_t>(params.hyper.T));
  // Full variance of the emission law, dry atom included.
  for (int t = 1; t <= params.hyper.T; ++t) {
    const double s = seasonal_scale(t, params.beta_row(k), params.hyper);
    double m1 = 0.0, m2 = 0.0;
    for (int m = 1; m < params.M(); ++m) {
      const double mean = s / params.lambda(k, m - 1);
      m1 += params.p(k, m) * mean;
      m2 += params.p(k, m) * 2.0 * mean * mean;
    }
    v[static_cast<std::size_t>(t - 1)] = m2 - m1 * m1;
  }
  return v;
}

double variance_from_projection(const BasisSpec& basis,
                                const Eigen::Ref<const Eigen::VectorXd>& column) {
  const double sh = std::sqrt(basis.width());
  double mass = column(0), m1 = 0.0, m2 = 0.0;
  for (int a = 1; a < basis.N; ++a) {
    const double w = column(a) * sh;
    const double mid = 0.5 * (basis.edges[static_cast<std::size_t>(a - 1)] +
                              basis.edges[static_cast<std::size_t>(a)]);
    mass += w;
    m1 += w * mid;
    m2 += w * mid * mid;
  }
  if (!(mass > 0.0)) return 0.0;
  m1 /= mass;
  m2 /= mass;
  return m2 - m1 * m1;
}

// --- mixture peeling ---------------------------------------------------------

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  bool ok = false;
};

LineFit fit_log_line(std::span<const double> grid,
                     const std::vector<double>& residual, double cutoff,
                     double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (x < lo || x > hi || !(residual[i] > cutoff)) continue;
    const double y = std::log(residual[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  LineFit f;
  const double den = count * sxx - sx * sx;
  if (count < 3 || !(den > 0.0)) return f;
  f.slope = (count * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / count;
  f.ok = true;
  return f;
}

}  // namespace

MixtureIdentification identify_mixture(double atom,
                                       std::span<const double> grid,
                                       std::span<const double> density,
                                       const PeelingOptions& options) {
  if (grid.size() != density.size()) {
    throw std::invalid_argument("grid and density lengths differ");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw std::invalid_argument("grid must be positive and increasing");
    }
  }
  MixtureIdentification out;
  out.dry = atom;
  const double wet_mass = 1.0 - atom;
  double f_max = 0.0;
  for (double v : density) f_max = std::max(f_max, v);
  const double cutoff = std::max(options.floor, options.relative_floor * f_max);

  struct Component {
    double rate, weight, lo, hi;
  };
  std::vector<Component> comps;
  std::vector<double> residual(density.begin(), density.end());

  auto component_at = [](const Component& c, double y) {
    return c.weight * c.rate * std::exp(-c.rate * y);
  };

  // Refits each component on its window with the others removed, until the
  // parameters settle.
  auto backfit = [&] {
    for (int sweep = 0; sweep < options.refinement_sweeps && comps.size() > 1; ++sweep) {
      double change = 0.0;
      for (std::size_t m = 0; m < comps.size(); ++m) {
        std::vector<double> r(density.begin(), density.end());
        for (std::size_t j = 0; j < comps.size(); ++j) {
          if (j == m) continue;
          for (std::size_t i = 0; i < grid.size(); ++i) r[i] -= component_at(comps[j], grid[i]);
        }
        const LineFit line = fit_log_line(grid, r, cutoff, comps[m].lo, comps[m].hi);
        if (!line.ok || !(line.slope < 0.0)) continue;
        const double rate = -line.slope;
        const double weight = std::exp(line.intercept) / rate;
        change = std::max({change, std::abs(rate / comps[m].rate - 1.0),
                           std::abs(weight - comps[m].weight) / std::max(wet_mass, 1e-12)});
        comps[m].rate = rate;
        comps[m].weight = weight;
      }
      if (change < 1e-13) break;
    }
    double extracted = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) residual[i] = density[i];
    for (const auto& c : comps) {
      extracted += c.weight;
      for (std::size_t i = 0; i < grid.size(); ++i) residual[i] -= component_at(c, grid[i]);
    }
    return extracted;
  };

  double extracted = 0.0;
  while (static_cast<int>(comps.size()) < options.max_components &&
         wet_mass - extracted > 1e-4 * std::max(wet_mass, 1e-12)) {
    // The residual is trusted only while it carries a visible share of the
    // density; beyond that it is fitting error of the components found so far.
    double last = -1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(residual[i] > std::max(cutoff, options.significance * density[i]))) break;
      last = grid[i];
    }
    if (last <= 0.0) break;
    const double lo = last / 10.0;
    const LineFit line = fit_log_line(grid, residual, cutoff, lo, last);
    if (!line.ok || !(line.slope < 0.0)) break;
    Component c{-line.slope, 0.0, lo, last};
    c.weight = std::exp(line.intercept) / c.rate;
    comps.push_back(c);
    extracted = backfit();
  }

  std::sort(comps.begin(), comps.end(),
            [](const Component& a, const Component& b) { return a.rate < b.rate; });
  for (std::size_t m = 0; m < comps.size(); ++m) {
    if (!(comps[m].weight >= 0.0)) {
      throw SpectralError("peeling produced a negative weight for component " +
                          std::to_string(m + 2));
    }
    if (m > 0 && comps[m].rate < comps[m - 1].rate * (1.0 + options.separation)) {
      throw SpectralError("rates " + std::to_string(comps[m - 1].rate) + " and " +
                          std::to_string(comps[m].rate) + " are not separated");
    }
    out.rates.push_back(comps[m].rate);
    out.weights.push_back(comps[m].weight);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double fit = 0.0;
    for (const auto& c : comps) fit += component_at(c, grid[i]);
    out.reconstruction_error =
        std::max(out.reconstruction_error, std::abs(fit - density[i]));
  }
  return out;
}

MixtureIdentification identify_mixture(
    const std::function<double(double)>& density,
    const PeelingOptions& options) {
  std::vector<double> grid, values;
  const double first = density(1e-3);
  const double stop = std::max(options.floor, options.relative_floor * first);
  for (double y = 1e-3; y < 1e5; y *= 1.02) {
    const double v = density(y);
    grid.push_back(y);
    values.push_back(v);
    if (v < stop) break;
  }
  return identify_mixture(density(0.0), grid, values, options);
}

}  // namespace shmm
