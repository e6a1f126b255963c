#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pgr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between an operand and what an operator expects.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Exact (eta = 0) inversion requested for an operator with spectral zeros.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, std::size_t singular_count)
      : Error(what), singular_count_(singular_count) {}

  std::size_t singular_count() const noexcept { return singular_count_; }

 private:
  std::size_t singular_count_;
};

/// NaN/Inf encountered during an iterative computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A denoiser failed; carries the scheme iteration when raised inside a run.
class DenoiserError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed file.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgr
