#pragma once

#include "shmm/inference.hpp"
#include "shmm/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace shmm {

// Orthonormal family in L²(δ0 + Lebesgue): φ_1 = 1{y = 0} and, for
// j = 1..N-1, φ_{j+1} = h^{-1/2} 1{y ∈ (edges[j-1], edges[j]]} with equal
// widths h = y_max / (N - 1). Values above y_max map to the zero vector.
struct BasisSpec {
  int N = 0;
  double y_max = 0.0;
  std::vector<double> edges;  // N values: 0, h, 2h, ..., y_max

  double width() const { return y_max / (N - 1); }
  // 0 for y == 0, j in 1..N-1 for the bin holding y, -1 above y_max.
  int index_of(double y) const;
  Eigen::VectorXd features(double y) const;
};

BasisSpec build_basis(int N, double y_max);

// Inner products ∫ φ_a φ_b dμ computed analytically (identity by design).
Eigen::MatrixXd gram_matrix(const BasisSpec& basis);

// Cutoff used for analytic moments: 10 / min_k,t (λ_km / s_k(t)).
double default_y_max(const ModelParams& params);

// O_t(a, k) = ⟨f_{k,t}, φ_a⟩ = E[φ_a(Y_t) | X_t = k], closed form for both
// emission modes.
Eigen::MatrixXd emission_projection(const ModelParams& params, long long t,
                                    const BasisSpec& basis);

// Low-order moments around day t:
//   L(a)        = E[φ_a(Y_t)]
//   M3(a, b, c) = E[φ_a(Y_{t-1}) φ_b(Y_t) φ_c(Y_{t+1})]
//   N2(a, c)    = E[φ_a(Y_t) φ_c(Y_{t+1})]
//   P2(a, c)    = E[φ_a(Y_{t-1}) φ_c(Y_{t+1})]
struct MomentSet {
  int t = 0;
  Eigen::VectorXd L;
  std::vector<Eigen::MatrixXd> M3;  // M3[b](a, c)
  Eigen::MatrixXd N2;
  Eigen::MatrixXd P2;
  long long replicates = 0;  // 0 for analytic moments
};

// Analytic moments under the stationary chain. Days wrap modulo T.
MomentSet exact_moments(const ModelParams& params, long long t,
                        const BasisSpec& basis);

struct MomentResiduals {
  double L = 0.0;
  double M3 = 0.0;
  double N2 = 0.0;
  double P2 = 0.0;
  double max() const;
};

// Max-abs differences between the moments and their matrix factorizations
// through O_{t-1}, O_t, O_{t+1}, π and Q.
MomentResiduals moment_equation_residuals(const MomentSet& moments,
                                          const ModelParams& params,
                                          const BasisSpec& basis);

// Averages over every (t-1, t, t+1) triple of consecutive observations whose
// middle day has day_of_year == t. Consecutive years are assumed contiguous,
// so the triples at days 1 and T straddle the year boundary.
MomentSet empirical_moments(const SeriesData& series, int t,
                            const BasisSpec& basis);

// Same, from a years x T matrix of whole years.
MomentSet empirical_moments(const RowMatrix& years, int t,
                            const BasisSpec& basis);

struct SpectralDiagnostics {
  Eigen::VectorXd singular_P2;  // spectrum of P2 at t
  Eigen::VectorXd singular_N2;  // spectrum of N2 at t
  double rank_tol = 0.0;
  int diagonalization_attempts = 0;
  double eigen_imag = 0.0;       // largest imaginary part in the accepted try
  double eigen_gap = 0.0;        // smallest eigenvalue gap in the accepted try
  double pi_sum_error = 0.0;     // |Σπ - 1| before normalization
  double Q_row_sum_error = 0.0;  // max_k |Σ_l Q(k,l) - 1| before normalization
  std::vector<int> next_day_alignment;  // state order of O_{t+1} vs O_t
};

struct SpectralEstimate {
  int t = 0;
  Eigen::MatrixXd O_t;
  Eigen::MatrixXd O_next;  // O_{t+1}, aligned with O_t
  Eigen::VectorXd pi;
  Eigen::MatrixXd Q;
  SpectralDiagnostics diagnostics;
};

struct SpectralOptions {
  // Relative to the largest singular value; 1e-10 suits analytic moments,
  // 1e-3 sample moments.
  double rank_tol = 1e-10;
  std::uint64_t seed = 0;
  int max_attempts = 5;
};

// Recovers (O_t, π, Q) from the moments at days t and t+1. The states come
// out in an arbitrary but consistent order. Throws SpectralError on rank
// deficiency or when no random combination diagonalizes cleanly.
SpectralEstimate spectral_recover(const MomentSet& at_t,
                                  const MomentSet& at_next, int K,
                                  const SpectralOptions& options = {});

// Emission projection of a single day, for callers that only need O_t.
Eigen::MatrixXd spectral_observation(const MomentSet& moments, int K,
                                     const SpectralOptions& options = {});

struct SeasonalityFit {
  Eigen::VectorXd scale;  // s(t), t = 1..T
  Eigen::VectorXd beta;   // (a_1, b_1, ..., a_d, b_d)
};

// From conditional variances V(Y_t | X_t = k), t = 1..T: s̃(t) = sqrt(V_t/V_1)
// is regressed on (1, Z(t)) by least squares and rescaled to constant term 1.
SeasonalityFit recover_seasonality(std::span<const double> variances, int d);

// Variances of one state's emission law over t = 1..T under the model.
std::vector<double> state_variances(const ModelParams& params, int k);

// Variance of a law given by a projection column, using bin midpoints.
double variance_from_projection(const BasisSpec& basis,
                                const Eigen::Ref<const Eigen::VectorXd>& column);

struct PeelingOptions {
  double floor = 1e-12;          // absolute cutoff on residual density
  double relative_floor = 1e-9;  // cutoff relative to the largest density
  int max_components = 8;
  int refinement_sweeps = 500;  // per backfit, stops early once settled
  double separation = 1e-3;      // adjacent rates must differ by this ratio
  double significance = 1e-2;    // residual share of the density worth peeling
};

struct MixtureIdentification {
  double dry = 0.0;              // p_1 = f(0)
  std::vector<double> weights;   // p_m, m >= 2, rates ascending
  std::vector<double> rates;     // λ_m ascending
  double reconstruction_error = 0.0;  // max |f - fit| on the grid
};

// Tail peeling on a density with an atom: f(0) is the atom mass, f(y) for
// y > 0 the continuous part Σ p_m λ_m e^{-λ_m y}. The slowest component is
// read off the last decade of the log residual, subtracted, and so on;
// after each peel, every component is refit against the others.
MixtureIdentification identify_mixture(double atom,
                                       std::span<const double> grid,
                                       std::span<const double> density,
                                       const PeelingOptions& options = {});

// Evaluates `density` on an internal geometric grid that extends until the
// density falls below the floor.
MixtureIdentification identify_mixture(
    const std::function<double(double)>& density,
    const PeelingOptions& options = {});

}  // namespace shmm
