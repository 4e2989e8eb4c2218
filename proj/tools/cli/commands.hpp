#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace shmm::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInputError = 2,
  kFitFailure = 3,
  kModelMismatch = 4,
  kSpectralRank = 5,
};

// Runs the shmm command line with `args` (program name excluded), writing
// user-facing messages to `out` and `err`. Never throws; returns the exit
// code.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace shmm::cli
