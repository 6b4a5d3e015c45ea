#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mflq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A closed loop (or matrix) has spectral radius >= 1 where < 1 is required.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// Input dimension exceeds what a dense direct solver is allowed to handle.
class UnsupportedDimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative method did not converge within its iteration cap.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be positive definite is not (e.g. G22 before projection).
class IllConditionedError : public Error {
 public:
  using Error::Error;
};

/// Not enough samples to form an estimate.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Schedule parameters leave no room for a phase.
class InfeasibleScheduleError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem. `line` is 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::string field = {},
              std::size_t line = 0)
      : Error(message), field_(std::move(field)), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

}  // namespace mflq
