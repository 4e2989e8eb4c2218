#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shmm {

// Parameter matrices are row-major so that per-state rows are contiguous.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class EmissionMode { Continuous, Discretized };

struct HyperParams {
  int K = 1;  // hidden states
  int M = 2;  // mixture size, including the dry component
  int d = 0;  // trigonometric degree of the seasonal scale
  int T = 365;
  EmissionMode mode = EmissionMode::Continuous;
  double resolution = 0.1;  // grid step in Discretized mode (mm)

  bool operator==(const HyperParams&) const = default;
};

// Full parameter vector of the seasonal HMM.
//
// Row k of `p` holds (p_k1, ..., p_kM) with column 0 the dry probability;
// row k of `lambda` holds the exponential rates of components 2..M; row k of
// `beta` holds (a_k1, b_k1, ..., a_kd, b_kd).
struct ModelParams {
  HyperParams hyper;
  RowMatrix Q;
  RowMatrix p;
  RowMatrix lambda;
  RowMatrix beta;

  // Zero-filled matrices of the right shapes.
  static ModelParams zeros(const HyperParams& hyper);

  int K() const { return hyper.K; }
  int M() const { return hyper.M; }
  std::span<const double> beta_row(int k) const {
    return {beta.data() + static_cast<std::ptrdiff_t>(k) * beta.cols(),
            static_cast<std::size_t>(beta.cols())};
  }
};

// Uniform bounds used by the consistency theory. All optional at fit time.
struct ParamBounds {
  double delta = 1e-3;
  double p_bar_min = 1e-3;
  double lambda_min = 1e-3;
  double lambda_max = 1e3;
  double sigma_min = 1e-3;
  double sigma_max = 1e3;
};

// A daily series. day_of_year[i] in 1..T aligns with values[i].
struct SeriesData {
  std::vector<double> values;
  std::vector<int> day_of_year;
  std::string station;
  std::vector<std::size_t> imputed;  // indices filled by imputation

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
};

// Reduces any t >= 1 (or any integer) into 1..T.
int reduce_day(long long t, int T);

// Row vector Z(t) = (cos(2πt/T), sin(2πt/T), ..., cos(2πdt/T), sin(2πdt/T)),
// evaluated at t reduced into 1..T.
Eigen::RowVectorXd trig_regressors(long long t, int d, int T);

// s_k(t) = 1 + Z(t)·beta_k. Pure evaluation, no positivity check.
double seasonal_scale(long long t, std::span<const double> beta_k,
                      const HyperParams& hyper);

// K x T table; column t-1 holds s_k(t) for every state.
RowMatrix scale_table(const ModelParams& params);

// p_km f_km,t(y) for m = 0..M-1 given the scale s = s_k(t). Continuous mode
// uses exponential densities, Discretized mode geometric masses on the grid.
// The dry component (m = 0) is the indicator of y == 0 in both modes.
void weighted_components(double y, int k, double scale,
                         const ModelParams& params, std::span<double> out);

// Density of Y_t | X_t = k with respect to δ0 + Lebesgue (Continuous mode).
double emission_density(double y, int k, long long t,
                        const ModelParams& params);

// Mass of the grid value y | X_t = k (Discretized mode).
double emission_pmf(double y, int k, long long t, const ModelParams& params);

// Mass that the discretized pmf of state k at day t puts on grid indices
// j >= j_from (closed-form geometric tail).
double pmf_tail_mass(long long j_from, int k, long long t,
                     const ModelParams& params);

// Conditional mean and variance of Y_t given X_t = k in Continuous mode.
double state_mean(int k, long long t, const ModelParams& params);
double state_variance(int k, long long t, const ModelParams& params);

// Irreducibility of the chain: strong connectivity of the positive entries.
bool is_irreducible(const Eigen::Ref<const RowMatrix>& Q);

// Unique π with πQ = π, Σπ = 1. Throws ModelError for reducible chains or
// when neither the direct solve nor power iteration reaches 1e-13.
Eigen::VectorXd stationary_distribution(const Eigen::Ref<const RowMatrix>& Q);

struct Violation {
  std::string rule;  // short identifier, e.g. "Q.row_sum" or "bounds.delta"
  int state = -1;    // 0-based, -1 when not state specific
  int day = -1;      // 1-based day of year, -1 when not day specific
  std::string message;
};

// Empty iff every ModelParams invariant holds (and every bound, when given).
std::vector<Violation> validate_params(
    const ModelParams& params, const std::optional<ParamBounds>& bounds = {});

// Throws ModelError summarizing all violations.
void require_valid(const ModelParams& params);

// Sorts the exponential components of every state by increasing rate,
// permuting the matching mixture weights.
ModelParams canonicalize(ModelParams params);

// Relabels states: new state i is old state perm[i].
ModelParams permute_states(const ModelParams& params,
                           std::span<const int> perm);

// True when y is a non-negative multiple of the resolution within 1e-9.
bool on_grid(double y, double resolution);

// Nearest grid value, returned as an exact multiple j * resolution.
double snap_to_grid(double y, double resolution);

// 0.1-style flooring onto the grid, returning an exact multiple j * resolution.
double floor_to_grid(double y, double resolution);

SeriesData discretize(const SeriesData& series, double resolution);

// Throws ModelError when the series does not fit the model (day index out of
// range, negative values, off-grid values in Discretized mode).
void check_series(const SeriesData& series, const HyperParams& hyper);

}  // namespace shmm
