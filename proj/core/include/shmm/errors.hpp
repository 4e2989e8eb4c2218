#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shmm {

// Malformed or unreadable input data (files, rows, calendars).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")"
                                : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Parameters that violate the model invariants, or model/data that disagree.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every observation-state pair has zero density at some time step.
class DegenerateLikelihood : public std::runtime_error {
 public:
  explicit DegenerateLikelihood(std::size_t index)
      : std::runtime_error("zero likelihood at time index " +
                           std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A hidden state received (numerically) no posterior mass.
class ZeroOccupancy : public FitError {
 public:
  explicit ZeroOccupancy(int state)
      : FitError("state " + std::to_string(state) + " has zero occupancy"),
        state_(state) {}
  int state() const noexcept { return state_; }

 private:
  int state_;
};

class SpectralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shmm
