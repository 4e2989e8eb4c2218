#pragma once

#include <shmm/inference.hpp>
#include <shmm/model.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shmm::cli {

struct SpectralSettings {
  int N = 0;                         // 0: 4K
  double y_max = 0.0;                // 0: automatic cutoff
  std::optional<double> rank_tol;    // empty: 1e-10 exact, 1e-3 empirical
  std::vector<int> days{2};
};

struct SimulateSettings {
  int count = 1000;
  long long n = 24090;
  int first_day = 1;
  std::string format = "bin";  // bin | csv
};

struct ValidateSettings {
  int ensemble_count = 1000;
  std::vector<double> probs{0.5, 0.75, 0.9, 0.95, 0.99};
  int qq_grid = 100;
  int max_spell = 30;
};

struct IngestSettings {
  bool suspect_as_missing = false;
};

struct IoSettings {
  std::string input;
  std::string output_dir = ".";
  std::string station;
};

// Everything that determines a run. Worker count is deliberately absent:
// results never depend on it.
struct RunConfig {
  std::string profile = "reproduction";
  std::uint64_t seed = 0;
  HyperParams hyper;
  EMConfig em;
  SpectralSettings spectral;
  SimulateSettings simulate;
  ValidateSettings validate;
  IngestSettings ingest;
  IoSettings io;
};

// "reproduction": K=4, M=3, d=2, T=365, 0.1 mm grid, 40 restarts.
// "quick": K=2, M=2, d=1, 3 restarts, 100 iterations, smaller ensembles.
RunConfig profile_defaults(std::string_view profile);

// Overlays the fields present in a JSON document onto `base`. Unknown keys
// and ill-typed values raise InputError.
RunConfig apply_config_json(RunConfig base, std::string_view json_text);

std::string config_to_json(const RunConfig& config);

}  // namespace shmm::cli
