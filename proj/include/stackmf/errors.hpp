#pragma once

#include <stdexcept>
#include <string>

namespace stackmf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: weights that do not sum to one, empty sample lists, ...
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Mismatched or unsupported dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Problem size beyond a configured cap (e.g. exact transport support limit).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range scalar parameter (q < 1, too few grid points, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A simulated state became non-finite.
class SimulationDiverged : public Error {
 public:
  SimulationDiverged(std::string what, long step)
      : Error(std::move(what) + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// An experiment whose replications cannot be trusted (too many failed
/// fixed points or diverged paths).
class ExperimentInvalid : public Error {
 public:
  ExperimentInvalid(std::string reason_code, const std::string& what)
      : Error(what), reason_(std::move(reason_code)) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

}  // namespace stackmf
