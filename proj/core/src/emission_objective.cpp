#include "shmm/emission_objective.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace shmm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

EmissionObjective::EmissionObjective(EmissionStats stats,
                                     const HyperParams& hyper)
    : stats_(std::move(stats)), hyper_(hyper), Z_(hyper.T, 2 * hyper.d) {
  if (stats_.weight.rows() != hyper.T ||
      stats_.weight.cols() != hyper.M - 1 ||
      stats_.weighted_sum.rows() != hyper.T ||
      stats_.weighted_sum.cols() != hyper.M - 1) {
    throw std::invalid_argument("EmissionObjective: statistics shape mismatch");
  }
  for (int t = 1; t <= hyper.T; ++t) {
    Z_.row(t - 1) = trig_regressors(t, hyper.d, hyper.T);
  }
}

Eigen::VectorXd EmissionObjective::scales(std::span<const double> beta) const {
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(),
                                            static_cast<Eigen::Index>(beta.size()));
  return Eigen::VectorXd::Ones(hyper_.T) + Z_ * b;
}

double EmissionObjective::value(std::span<const double> lambda,
                                std::span<const double> beta) const {
  Eigen::VectorXd theta(components() + beta_size());
  for (int m = 0; m < components(); ++m) {
    if (!(lambda[m] > 0.0)) return kNegInf;
    theta(m) = std::log(lambda[m]);
  }
  for (int j = 0; j < beta_size(); ++j) theta(components() + j) = beta[j];
  return value_and_gradient(theta, nullptr);
}

double EmissionObjective::value_and_gradient(const Eigen::VectorXd& theta,
                                             Eigen::VectorXd* grad) const {
  const int C = components();
  const int B = beta_size();
  const Eigen::VectorXd s =
      scales({theta.data() + C, static_cast<std::size_t>(B)});
  if (!(s.minCoeff() > 0.0)) return kNegInf;
  if (grad) grad->setZero(C + B);

  const bool discretized = hyper_.mode == EmissionMode::Discretized;
  const double r = hyper_.resolution;
  double total = 0.0;
  for (int m = 0; m < C; ++m) {
    const double log_lambda = theta(m);
    const double lambda = std::exp(log_lambda);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) return kNegInf;
    double d_loglambda = 0.0;
    for (int t = 0; t < hyper_.T; ++t) {
      const double G = stats_.weight(t, m);
      const double H = stats_.weighted_sum(t, m);
      if (G == 0.0 && H == 0.0) continue;
      const double rate = lambda / s(t);
      // dF/d rate; rate depends on (log λ, β) through ρ = λ / s.
      double dF_drate;
      if (discretized) {
        const double u = r * rate;
        total += G * std::log(-std::expm1(-u)) - rate * H;
        dF_drate = G * r / std::expm1(u) - H;
      } else {
        total += G * (log_lambda - std::log(s(t))) - rate * H;
        // Continuous: F = G (log ρ) − ρ H; log ρ = log λ − log s.
        dF_drate = G / rate - H;
      }
      if (grad) {
        d_loglambda += dF_drate * rate;
        const double d_s = -dF_drate * rate / s(t);
        for (int j = 0; j < B; ++j) (*grad)(C + j) += d_s * Z_(t, j);
      }
    }
    if (grad) (*grad)(m) = d_loglambda;
  }
  return total;
}

double EmissionObjective::log_barrier(std::span<const double> beta,
                                      double floor,
                                      Eigen::VectorXd* grad) const {
  const Eigen::VectorXd s = scales(beta);
  if (grad) grad->setZero(beta_size());
  double total = 0.0;
  for (int t = 0; t < hyper_.T; ++t) {
    const double gap = s(t) - floor;
    if (!(gap > 0.0)) return kNegInf;
    total += std::log(gap);
    if (grad) *grad += Z_.row(t).transpose() / gap;
  }
  return total;
}

Eigen::VectorXd EmissionObjective::profile_lambda(
    std::span<const double> beta, std::span<const double> fallback) const {
  const Eigen::VectorXd s = scales(beta);
  Eigen::VectorXd lambda(components());
  for (int m = 0; m < components(); ++m) {
    double G = 0.0, H = 0.0;
    for (int t = 0; t < hyper_.T; ++t) {
      G += stats_.weight(t, m);
      H += stats_.weighted_sum(t, m) / s(t);
    }
    lambda(m) = (G > 0.0 && H > 0.0) ? G / H : fallback[m];
  }
  return lambda;
}

}  // namespace shmm
