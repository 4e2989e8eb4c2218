#pragma once

#include "shmm/emission_objective.hpp"
#include "shmm/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shmm {

class Rng;

// Dense row-major 3-way array.
struct Tensor3 {
  Eigen::Index d0 = 0, d1 = 0, d2 = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(Eigen::Index a, Eigen::Index b, Eigen::Index c)
      : d0(a), d1(b), d2(c), data(static_cast<std::size_t>(a * b * c), 0.0) {}

  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data[static_cast<std::size_t>((i * d1 + j) * d2 + k)];
  }
  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data[static_cast<std::size_t>((i * d1 + j) * d2 + k)];
  }
};

// Initial law of the hidden chain; empty means the stationary law of Q.
using InitialLaw = std::optional<Eigen::VectorXd>;

// Per-observation emission terms: components(t, k, m) = p_km f_km,t(Y_t) and
// density(t, k) = Σ_m components(t, k, m).
struct EmissionTable {
  RowMatrix density;
  Tensor3 components;
};

EmissionTable emission_table(const ModelParams& params,
                             const SeriesData& data);

// Output of one E-step. State indices are 0-based throughout the library.
struct PosteriorSet {
  RowMatrix smoothing;        // n x K, P(X_t = k | Y)
  Tensor3 pair_smoothing;     // (n-1) x K x K, P(X_t = k, X_{t+1} = l | Y)
  Tensor3 responsibilities;   // n x K x M, P(X_t = (k, m) | Y)
  double loglik = 0.0;
};

// Scaled forward recursion. Throws DegenerateLikelihood with the 0-based
// time index when every state has zero density.
double log_likelihood(const ModelParams& params, const SeriesData& data,
                      const InitialLaw& init = {});

// Same quantity via the normalized backward recursion only.
double log_likelihood_backward(const ModelParams& params,
                               const SeriesData& data,
                               const InitialLaw& init = {});

// Per-step log normalizers log c_t of the scaled forward pass; their sum is
// the log-likelihood.
Eigen::VectorXd forward_log_normalizers(const ModelParams& params,
                                        const SeriesData& data,
                                        const InitialLaw& init = {});

PosteriorSet e_step(const ModelParams& params, const SeriesData& data,
                    const InitialLaw& init = {});

struct ClosedFormUpdate {
  Eigen::VectorXd initial;  // π_k = P(X_1 = k | Y)
  RowMatrix Q;
  RowMatrix p;
};

// Closed-form maximizers of the initial-law, transition and weight terms.
// Throws ZeroOccupancy when Σ_t P(X_t = k | Y) < 1e-12.
ClosedFormUpdate m_step_closed(const PosteriorSet& post);

struct OptimizerConfig {
  int max_evals = 200;
  double barrier_weight = 1e-3;
  double scale_floor = 1e-3;  // s_k(t) is kept above this value
};

struct EmissionUpdate {
  RowMatrix lambda;
  RowMatrix beta;
  std::vector<bool> accepted;  // false: the state kept its previous values
  Eigen::VectorXd objective_before;
  Eigen::VectorXd objective_after;
  bool optimizer_failed = false;
};

EmissionStats emission_stats(const PosteriorSet& post, const SeriesData& data,
                             int k, const HyperParams& hyper);

// Generalized M-step for (λ, β), state by state. Continuous mode profiles λ
// in closed form and runs BFGS on β; Discretized mode runs BFGS on
// (log λ, β). A log-barrier keeps s_k(t) above the floor on every day. A
// state's candidate is kept only if its emission objective does not decrease.
EmissionUpdate m_step_emission(const PosteriorSet& post, const SeriesData& data,
                               const ModelParams& prev,
                               const OptimizerConfig& config = {});

// Most likely state path (0-based), over the K physical states with
// mixture-marginalized emissions. Ties go to the lowest state index.
std::vector<int> viterbi(const ModelParams& params, const SeriesData& data,
                         const InitialLaw& init = {});

// Per-time argmax of the smoothing probabilities, ties to the lowest index.
std::vector<int> map_states(const PosteriorSet& post);

// --- EM fitting --------------------------------------------------------------

struct EMConfig {
  int restarts = 40;
  double epsilon = 1e-6;
  int max_iters = 500;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
};

struct RestartResult {
  int index = 0;
  ModelParams params;
  Eigen::VectorXd initial;
  std::vector<double> loglik_trace;
  int iterations = 0;
  int null_emission_steps = 0;
  bool converged = false;
  bool failed = false;
  std::string error;
};

struct FitReport {
  ModelParams params;  // canonical λ ordering
  std::vector<double> loglik_trace;
  int restarts = 0;
  int best_restart = -1;
  int iterations = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  std::vector<RestartResult> runs;  // one entry per restart, by index
};

// Starting point of one restart: Q rows ∝ uniform + 2·I, p rows from a flat
// Dirichlet, rates log-uniform on [0.05, 20] sorted, β = 0.
ModelParams random_initialization(const HyperParams& hyper, Rng& rng);

// EM from a given start. Stops when the relative log-likelihood improvement
// falls below epsilon or after max_iters M-steps. Errors are reported in the
// result, not thrown.
RestartResult em_run(const SeriesData& data, const ModelParams& start,
                     const Eigen::VectorXd& start_initial,
                     const EMConfig& config);

// Multi-restart EM. Restart i draws its start from Rng::stream(seed, i);
// restarts run on up to `jobs` threads and the best log-likelihood wins
// (lowest index on ties), so the report does not depend on `jobs`.
// Throws FitError when every restart fails.
FitReport em_fit(const SeriesData& data, const HyperParams& hyper,
                 const EMConfig& config, int jobs = 1);

}  // namespace shmm
