#pragma once

#include <stdexcept>
#include <string>

namespace kzpsd {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Propagation produced non-finite samples or could not meet the step bound.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// The nonlinear phase per step exceeds the configured bound and refinement is off.
class StepTooCoarse : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Integer overflow in exact resonance arithmetic.
class OverflowError : public Error {
public:
  using Error::Error;
};

/// Work estimate of an O(N^5) sum exceeds the configured guard.
class CostLimitExceeded : public Error {
public:
  using Error::Error;
};

/// Monte-Carlo realization failure, tagged with the realization index.
class RealizationError : public Error {
public:
  RealizationError(std::size_t index, const std::string& what)
      : Error("realization " + std::to_string(index) + ": " + what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace kzpsd
