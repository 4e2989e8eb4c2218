#pragma once

#include "shmm/model.hpp"

#include <Eigen/Dense>

#include <span>

namespace shmm {

// Sufficient statistics of the emission part of the intermediate quantity
// for one state, aggregated by day of year. Row d-1, column m-1 hold, for the
// exponential component m + 1:
//   weight(d-1, m-1)       = Σ_{t : doy(t) = d} γ_t(k, m+1)
//   weighted_sum(d-1, m-1) = Σ_{t : doy(t) = d} γ_t(k, m+1) · Y_t
struct EmissionStats {
  RowMatrix weight;
  RowMatrix weighted_sum;
};

// Emission term of the intermediate quantity for one state,
//   Continuous:  Σ_t Σ_m γ_t(k,m) [log λ_m − log s(t) − λ_m Y_t / s(t)]
//   Discretized: Σ_t Σ_m γ_t(k,m) [log(1 − e^{−r λ_m / s(t)}) − λ_m Y_t / s(t)]
// with s(t) = 1 + Z(t)β. The optimizer works on θ = (log λ, β).
class EmissionObjective {
 public:
  EmissionObjective(EmissionStats stats, const HyperParams& hyper);

  int components() const { return static_cast<int>(stats_.weight.cols()); }
  int beta_size() const { return static_cast<int>(Z_.cols()); }

  // -infinity when some rate or some s(t), t in 1..T, is not positive.
  double value(std::span<const double> lambda,
               std::span<const double> beta) const;

  // Value and gradient with respect to θ = (log λ, β).
  double value_and_gradient(const Eigen::VectorXd& theta,
                            Eigen::VectorXd* grad) const;

  // Σ_{t=1..T} log(s(t) − floor), or -infinity when some s(t) <= floor.
  double log_barrier(std::span<const double> beta, double floor,
                     Eigen::VectorXd* grad = nullptr) const;

  // Continuous mode: λ_m maximizing the objective for fixed β,
  //   λ_m = Σ_t γ_t(m) / Σ_t γ_t(m) Y_t / s(t).
  // Components with no weight keep their value from `fallback`.
  Eigen::VectorXd profile_lambda(std::span<const double> beta,
                                 std::span<const double> fallback) const;

  Eigen::VectorXd scales(std::span<const double> beta) const;

 private:
  EmissionStats stats_;
  HyperParams hyper_;
  Eigen::MatrixXd Z_;  // T x 2d trigonometric regressors
};

}  // namespace shmm
