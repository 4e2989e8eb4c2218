#pragma once

#include "shmm/model.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace shmm {

class Rng;

// Markov chain path (0-based states) of length n with X_1 ~ pi.
std::vector<int> simulate_chain(const Eigen::Ref<const RowMatrix>& Q,
                                const Eigen::VectorXd& pi, std::size_t n,
                                Rng& rng);

struct SimulatedSeries {
  SeriesData series;
  std::vector<int> states;
};

// Draws n days starting at day_of_year `first_day`, with X_1 from the
// stationary law of Q. Discretized draws land exactly on the grid.
SimulatedSeries simulate_with_states(const ModelParams& params, std::size_t n,
                                     Rng& rng, int first_day = 1);

SeriesData simulate_series(const ModelParams& params, std::size_t n,
                           std::uint64_t seed, int first_day = 1);

struct SimulationBatch {
  std::vector<SeriesData> series;
  std::uint64_t seed = 0;
  int T = 365;
  ModelParams params_used;  // not stored in batch files
};

// Member i is simulate_series driven by Rng::stream(seed, i), so members do
// not depend on `jobs` or on each other.
SimulationBatch bootstrap_ensemble(const ModelParams& params, std::size_t n,
                                   std::size_t count, std::uint64_t seed,
                                   int jobs = 1, int first_day = 1);

// Binary batch container, little endian:
//   "SHMM" | u32 version (1) | u32 count | u64 n | u32 T | u32 first_day |
//   u64 seed | count * n f64 values
void write_batch_binary(const std::filesystem::path& path,
                        const SimulationBatch& batch);
SimulationBatch read_batch_binary(const std::filesystem::path& path);

// CSV with header member,index,day_of_year,value (index 1-based).
void write_batch_csv(const std::filesystem::path& path,
                     const SimulationBatch& batch);
SimulationBatch read_batch_csv(const std::filesystem::path& path);

// Dispatches on the extension: ".bin" binary, anything else CSV.
SimulationBatch read_batch(const std::filesystem::path& path);

}  // namespace shmm
