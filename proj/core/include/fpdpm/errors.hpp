#pragma once

#include <stdexcept>
#include <string>

namespace fpdpm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array shapes that do not fit the grid or the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Coefficient containers whose level sizes disagree with their grid.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Internal sampler bookkeeping went inconsistent (dangling labels, zero weights).
class StateCorruptionError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range arguments to a pure function.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Hyperparameters or run settings that cannot produce a valid chain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data on which a method is undefined (zero variance, single cluster).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A chain produced a NaN/Inf. Carries the sweep index and the parameter block.
class NumericAbort : public Error {
 public:
  NumericAbort(int iteration, std::string block, const std::string& detail)
      : Error("numeric abort at iteration " + std::to_string(iteration) + " in block '" +
              block + "': " + detail),
        iteration_(iteration),
        block_(std::move(block)) {}

  int iteration() const noexcept { return iteration_; }
  const std::string& block() const noexcept { return block_; }

 private:
  int iteration_;
  std::string block_;
};

}  // namespace fpdpm
