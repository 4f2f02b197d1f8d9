#ifndef ESSM_ERROR_HPP
#define ESSM_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace essm {

/// Base of every error raised by the library. Catch this to handle any
/// failure originating in essm.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// AR polynomial has a root on or inside the unit circle.
class CausalityError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// AR(2) polynomial has real roots, so there is no oscillation to report.
class NoOscillationError : public DomainError {
 public:
  using DomainError::DomainError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A covariance that should be positive definite failed to factor.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, std::size_t step)
      : Error(what + " (t=" + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

class CollinearityError : public Error {
 public:
  using Error::Error;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input files.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace essm

#endif  // ESSM_ERROR_HPP
