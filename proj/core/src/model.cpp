#include "shmm/model.hpp"

#include "shmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace shmm {

namespace {

constexpr double kStochasticTol = 1e-10;

// Exact decimal values on grids like 0.1: j / 10 rounds to the nearest double
// of the decimal, whereas j * 0.1 can drift by one ulp.
double grid_value(long long j, double resolution) {
  const double inv = 1.0 / resolution;
  const double inv_round = std::round(inv);
  if (inv_round >= 1.0 && std::abs(inv - inv_round) < 1e-9) {
    return static_cast<double>(j) / inv_round;
  }
  return static_cast<double>(j) * resolution;
}

std::vector<Violation> check_hyper(const HyperParams& h) {
  std::vector<Violation> out;
  if (h.K < 1) out.push_back({"hyper.K", -1, -1, "K must be >= 1"});
  if (h.M < 2) out.push_back({"hyper.M", -1, -1, "M must be >= 2"});
  if (h.d < 0) out.push_back({"hyper.d", -1, -1, "d must be >= 0"});
  if (h.T < 1) out.push_back({"hyper.T", -1, -1, "T must be >= 1"});
  if (!(h.resolution > 0.0)) {
    out.push_back({"hyper.resolution", -1, -1, "resolution must be > 0"});
  }
  return out;
}

void check_stochastic_rows(const RowMatrix& m, const std::string& name,
                           std::vector<Violation>& out) {
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(k, j);
      if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream msg;
        msg << name << "(" << k << "," << j << ") = " << v
            << " is negative or not finite";
        out.push_back({name + ".entry", static_cast<int>(k), -1, msg.str()});
      }
      sum += v;
    }
    if (!(std::abs(sum - 1.0) <= kStochasticTol)) {
      std::ostringstream msg;
      msg << name << " row " << k << " sums to " << sum;
      out.push_back({name + ".row_sum", static_cast<int>(k), -1, msg.str()});
    }
  }
}

}  // namespace

ModelParams ModelParams::zeros(const HyperParams& hyper) {
  ModelParams p;
  p.hyper = hyper;
  p.Q = RowMatrix::Zero(hyper.K, hyper.K);
  p.p = RowMatrix::Zero(hyper.K, hyper.M);
  p.lambda = RowMatrix::Zero(hyper.K, hyper.M - 1);
  p.beta = RowMatrix::Zero(hyper.K, 2 * hyper.d);
  return p;
}

int reduce_day(long long t, int T) {
  long long r = (t - 1) % T;
  if (r < 0) r += T;
  return static_cast<int>(r) + 1;
}

Eigen::RowVectorXd trig_regressors(long long t, int d, int T) {
  Eigen::RowVectorXd z(2 * d);
  const double base =
      2.0 * std::numbers::pi * static_cast<double>(reduce_day(t, T)) / T;
  for (int l = 1; l <= d; ++l) {
    z(2 * l - 2) = std::cos(base * l);
    z(2 * l - 1) = std::sin(base * l);
  }
  return z;
}

double seasonal_scale(long long t, std::span<const double> beta_k,
                      const HyperParams& hyper) {
  if (beta_k.size() != static_cast<std::size_t>(2 * hyper.d)) {
    throw std::invalid_argument("seasonal_scale: beta_k must have 2d entries");
  }
  const double base =
      2.0 * std::numbers::pi * static_cast<double>(reduce_day(t, hyper.T)) /
      hyper.T;
  double s = 1.0;
  for (int l = 1; l <= hyper.d; ++l) {
    s += beta_k[2 * l - 2] * std::cos(base * l) +
         beta_k[2 * l - 1] * std::sin(base * l);
  }
  return s;
}

RowMatrix scale_table(const ModelParams& params) {
  const auto& h = params.hyper;
  RowMatrix table(h.K, h.T);
  for (int k = 0; k < h.K; ++k) {
    const auto b = params.beta_row(k);
    for (int t = 1; t <= h.T; ++t) table(k, t - 1) = seasonal_scale(t, b, h);
  }
  return table;
}

void weighted_components(double y, int k, double scale,
                         const ModelParams& params, std::span<double> out) {
  const int M = params.hyper.M;
  out[0] = (y == 0.0) ? params.p(k, 0) : 0.0;
  if (params.hyper.mode == EmissionMode::Continuous) {
    for (int m = 1; m < M; ++m) {
      const double rate = params.lambda(k, m - 1) / scale;
      out[m] = (y > 0.0) ? params.p(k, m) * rate * std::exp(-rate * y) : 0.0;
    }
  } else {
    const double r = params.hyper.resolution;
    for (int m = 1; m < M; ++m) {
      const double rate = params.lambda(k, m - 1) / scale;
      const double alpha = -std::expm1(-r * rate);
      out[m] = params.p(k, m) * alpha * std::exp(-rate * y);
    }
  }
}

double emission_density(double y, int k, long long t,
                        const ModelParams& params) {
  if (params.hyper.mode != EmissionMode::Continuous) {
    throw std::invalid_argument("emission_density requires Continuous mode");
  }
  if (!(y >= 0.0)) {
    throw std::invalid_argument("emission_density: y must be >= 0");
  }
  const double s = seasonal_scale(t, params.beta_row(k), params.hyper);
  std::vector<double> comp(params.hyper.M);
  weighted_components(y, k, s, params, comp);
  return std::accumulate(comp.begin(), comp.end(), 0.0);
}

double emission_pmf(double y, int k, long long t, const ModelParams& params) {
  if (params.hyper.mode != EmissionMode::Discretized) {
    throw std::invalid_argument("emission_pmf requires Discretized mode");
  }
  if (!on_grid(y, params.hyper.resolution)) {
    throw std::invalid_argument("emission_pmf: value is not on the grid");
  }
  const double s = seasonal_scale(t, params.beta_row(k), params.hyper);
  const double r = params.hyper.resolution;
  const double yg = grid_value(std::llround(y / r), r);
  std::vector<double> comp(params.hyper.M);
  weighted_components(yg, k, s, params, comp);
  return std::accumulate(comp.begin(), comp.end(), 0.0);
}

double pmf_tail_mass(long long j_from, int k, long long t,
                     const ModelParams& params) {
  if (j_from <= 0) return 1.0;
  const double s = seasonal_scale(t, params.beta_row(k), params.hyper);
  const double r = params.hyper.resolution;
  double tail = 0.0;
  for (int m = 1; m < params.hyper.M; ++m) {
    const double rate = params.lambda(k, m - 1) / s;
    tail += params.p(k, m) * std::exp(-rate * r * static_cast<double>(j_from));
  }
  return tail;
}

double state_mean(int k, long long t, const ModelParams& params) {
  const double s = seasonal_scale(t, params.beta_row(k), params.hyper);
  double m1 = 0.0;
  for (int m = 1; m < params.hyper.M; ++m) {
    m1 += params.p(k, m) / params.lambda(k, m - 1);
  }
  return s * m1;
}

double state_variance(int k, long long t, const ModelParams& params) {
  const double s = seasonal_scale(t, params.beta_row(k), params.hyper);
  double m1 = 0.0, m2 = 0.0;
  for (int m = 1; m < params.hyper.M; ++m) {
    const double l = params.lambda(k, m - 1);
    m1 += params.p(k, m) / l;
    m2 += 2.0 * params.p(k, m) / (l * l);
  }
  return s * s * (m2 - m1 * m1);
}

bool is_irreducible(const Eigen::Ref<const RowMatrix>& Q) {
  const Eigen::Index K = Q.rows();
  if (K == 0) return false;
  auto reaches_all = [&](bool transpose) {
    std::vector<char> seen(K, 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < K; ++j) {
        const double q = transpose ? Q(j, i) : Q(i, j);
        if (q > 0.0 && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c; });
  };
  return reaches_all(false) && reaches_all(true);
}

Eigen::VectorXd stationary_distribution(const Eigen::Ref<const RowMatrix>& Q) {
  const Eigen::Index K = Q.rows();
  if (K == 0 || Q.cols() != K) {
    throw std::invalid_argument("stationary_distribution: Q must be square");
  }
  if (!is_irreducible(Q)) {
    throw ModelError("stationary_distribution: transition matrix is reducible");
  }
  constexpr double kTol = 1e-13;
  auto residual = [&](const Eigen::VectorXd& pi) {
    return (Q.transpose() * pi - pi).cwiseAbs().maxCoeff();
  };

  Eigen::MatrixXd A(K + 1, K);
  A.topRows(K) = Q.transpose() - Eigen::MatrixXd::Identity(K, K);
  A.row(K).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K + 1);
  b(K) = 1.0;
  Eigen::VectorXd pi = A.colPivHouseholderQr().solve(b);
  pi /= pi.sum();
  if (pi.allFinite() && pi.minCoeff() > 0.0 && residual(pi) < kTol) return pi;

  // Lazy chain (I + Q) / 2 shares π and converges for periodic chains too.
  pi = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  for (int iter = 0; iter < 100000; ++iter) {
    Eigen::VectorXd next = 0.5 * (pi + Q.transpose() * pi);
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().maxCoeff();
    pi = std::move(next);
    if (change < kTol) return pi;
  }
  throw ModelError("stationary_distribution: power iteration did not converge");
}

std::vector<Violation> validate_params(const ModelParams& params,
                                       const std::optional<ParamBounds>& bounds) {
  std::vector<Violation> out = check_hyper(params.hyper);
  if (!out.empty()) return out;
  const auto& h = params.hyper;

  auto shape = [&](const RowMatrix& m, Eigen::Index r, Eigen::Index c,
                   const char* name) {
    if (m.rows() != r || m.cols() != c) {
      std::ostringstream msg;
      msg << name << " has shape " << m.rows() << "x" << m.cols()
          << ", expected " << r << "x" << c;
      out.push_back({std::string(name) + ".shape", -1, -1, msg.str()});
      return false;
    }
    return true;
  };
  bool ok = shape(params.Q, h.K, h.K, "Q");
  ok = shape(params.p, h.K, h.M, "p") && ok;
  ok = shape(params.lambda, h.K, h.M - 1, "lambda") && ok;
  ok = shape(params.beta, h.K, 2 * h.d, "beta") && ok;
  if (!ok) return out;

  check_stochastic_rows(params.Q, "Q", out);
  check_stochastic_rows(params.p, "p", out);
  for (int k = 0; k < h.K; ++k) {
    for (int m = 0; m < h.M - 1; ++m) {
      const double l = params.lambda(k, m);
      if (!(std::isfinite(l) && l > 0.0)) {
        std::ostringstream msg;
        msg << "lambda(" << k << "," << m << ") = " << l << " is not > 0";
        out.push_back({"lambda.positive", k, -1, msg.str()});
      }
    }
    for (Eigen::Index j = 0; j < params.beta.cols(); ++j) {
      if (!std::isfinite(params.beta(k, j))) {
        out.push_back({"beta.finite", k, -1, "beta has a non-finite entry"});
      }
    }
  }

  const RowMatrix scales = scale_table(params);
  for (int k = 0; k < h.K; ++k) {
    for (int t = 1; t <= h.T; ++t) {
      const double s = scales(k, t - 1);
      if (!(s > 0.0)) {
        std::ostringstream msg;
        msg << "seasonal scale of state " << k << " is " << s << " at day "
            << t;
        out.push_back({"scale.positive", k, t, msg.str()});
        break;
      }
    }
  }

  if (!bounds) return out;
  const ParamBounds& b = *bounds;
  if (!(b.delta > 0.0 && b.delta <= 1.0 / h.K)) {
    out.push_back({"bounds.invalid", -1, -1, "delta must lie in (0, 1/K]"});
  }
  if (!(b.lambda_min > 0.0 && b.lambda_min < b.lambda_max)) {
    out.push_back(
        {"bounds.invalid", -1, -1, "need 0 < lambda_min < lambda_max"});
  }
  if (!(b.sigma_min > 0.0 && b.sigma_min < b.sigma_max)) {
    out.push_back({"bounds.invalid", -1, -1, "need 0 < sigma_min < sigma_max"});
  }
  if (params.Q.minCoeff() < b.delta) {
    std::ostringstream msg;
    msg << "min Q entry " << params.Q.minCoeff() << " below delta " << b.delta;
    out.push_back({"bounds.delta", -1, -1, msg.str()});
  }
  if (params.p.col(0).sum() < b.p_bar_min) {
    out.push_back({"bounds.p_bar_min", -1, -1,
                   "sum of dry probabilities below p_bar_min"});
  }
  for (int k = 0; k < h.K; ++k) {
    for (int m = 0; m < h.M - 1; ++m) {
      const double l = params.lambda(k, m);
      if (l < b.lambda_min || l > b.lambda_max) {
        out.push_back({"bounds.lambda", k, -1,
                       "rate outside [lambda_min, lambda_max]"});
      }
    }
    for (int t = 1; t <= h.T; ++t) {
      const double s = scales(k, t - 1);
      if (s < b.sigma_min || s > b.sigma_max) {
        out.push_back({"bounds.sigma", k, t,
                       "seasonal scale outside [sigma_min, sigma_max]"});
        break;
      }
    }
  }
  return out;
}

void require_valid(const ModelParams& params) {
  const auto violations = validate_params(params);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "invalid model parameters:";
  for (const auto& v : violations) msg << "\n  [" << v.rule << "] " << v.message;
  throw ModelError(msg.str());
}

ModelParams canonicalize(ModelParams params) {
  const int C = params.hyper.M - 1;
  std::vector<int> order(C);
  for (int k = 0; k < params.hyper.K; ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return params.lambda(k, a) < params.lambda(k, b);
    });
    const Eigen::RowVectorXd lam = params.lambda.row(k);
    const Eigen::RowVectorXd w = params.p.row(k);
    for (int i = 0; i < C; ++i) {
      params.lambda(k, i) = lam(order[i]);
      params.p(k, i + 1) = w(order[i] + 1);
    }
  }
  return params;
}

ModelParams permute_states(const ModelParams& params,
                           std::span<const int> perm) {
  const int K = params.hyper.K;
  if (perm.size() != static_cast<std::size_t>(K)) {
    throw std::invalid_argument("permute_states: permutation size mismatch");
  }
  ModelParams out = params;
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) out.Q(i, j) = params.Q(perm[i], perm[j]);
    out.p.row(i) = params.p.row(perm[i]);
    out.lambda.row(i) = params.lambda.row(perm[i]);
    out.beta.row(i) = params.beta.row(perm[i]);
  }
  return out;
}

bool on_grid(double y, double resolution) {
  if (!(y >= 0.0) || !std::isfinite(y)) return false;
  const double j = std::round(y / resolution);
  return std::abs(y - j * resolution) <= 1e-9;
}

double snap_to_grid(double y, double resolution) {
  return grid_value(std::llround(y / resolution), resolution);
}

double floor_to_grid(double y, double resolution) {
  const auto j = static_cast<long long>(std::floor(y / resolution + 1e-9));
  return grid_value(std::max(j, 0LL), resolution);
}

SeriesData discretize(const SeriesData& series, double resolution) {
  SeriesData out = series;
  for (double& v : out.values) v = floor_to_grid(v, resolution);
  return out;
}

void check_series(const SeriesData& series, const HyperParams& hyper) {
  if (series.values.size() != series.day_of_year.size()) {
    throw ModelError("series values and day_of_year lengths differ");
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const int doy = series.day_of_year[i];
    if (doy < 1 || doy > hyper.T) {
      throw ModelError("day_of_year " + std::to_string(doy) + " at index " +
                       std::to_string(i) + " outside 1.." +
                       std::to_string(hyper.T));
    }
    const double v = series.values[i];
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ModelError("negative or non-finite value at index " +
                       std::to_string(i));
    }
    if (hyper.mode == EmissionMode::Discretized &&
        !on_grid(v, hyper.resolution)) {
      throw ModelError("value at index " + std::to_string(i) +
                       " is not on the discretization grid");
    }
  }
}

}  // namespace shmm
