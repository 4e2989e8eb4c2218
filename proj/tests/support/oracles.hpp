#pragma once

#include <shmm/model.hpp>

#include <Eigen/Dense>
#include <filesystem>
#include <random>
#include <vector>

namespace shmm::testing {

// Emission density written directly from the model formulas, without the
// library's evaluation code.
double emission_oracle(double y, int k, long long t, const ModelParams& params);

// Exhaustive summation over all K^n state paths.
struct Enumeration {
  double loglik = 0.0;
  Eigen::MatrixXd smoothing;  // n x K
  std::vector<int> best_path;
  double best_score = 0.0;    // log joint of best_path
  double runner_up = 0.0;     // best log joint among the other paths
};
// Tie rule for the best path: smallest final state, then smallest state at
// each earlier step, read backwards.
Enumeration enumerate_paths(const ModelParams& params, const SeriesData& data,
                            const Eigen::VectorXd& initial);

// Log joint of (path, data) under the model.
double path_log_score(const ModelParams& params, const SeriesData& data,
                      const Eigen::VectorXd& initial, const std::vector<int>& path);

ModelParams random_model(std::mt19937_64& gen, int K, int M, int d, int T,
                         EmissionMode mode, double resolution = 0.1);

// Mix of dry days and exponential amounts; on the grid in Discretized mode.
SeriesData random_series(std::mt19937_64& gen, std::size_t n, int T,
                         EmissionMode mode, double resolution = 0.1);

Eigen::VectorXd random_simplex(std::mt19937_64& gen, int K);

// Left eigenvector of Q for eigenvalue 1, normalized to sum 1.
Eigen::VectorXd stationary_oracle(const RowMatrix& Q);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& path);

}  // namespace shmm::testing
