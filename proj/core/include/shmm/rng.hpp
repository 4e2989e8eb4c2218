#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace shmm {

std::uint64_t splitmix64(std::uint64_t x);

// Seed of stream `index` under `master_seed`.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(master_seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Random source used across the library: std::mt19937_64 seeded through
// SplitMix64. Independent streams are derived from (master seed, index) so
// that parallel work never shares generator state and draws do not depend
// on scheduling. Variate transforms are implemented here, not taken from
// <random> distributions, so sequences are identical across standard
// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static Rng stream(std::uint64_t master_seed, std::uint64_t index) {
    return Rng(derive_seed(master_seed, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  double exponential();
  double normal();

  // Index drawn from non-negative weights (need not be normalized).
  int categorical(std::span<const double> weights);

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace shmm
