#pragma once

#include <stdexcept>
#include <string>

namespace radiomap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or layout mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Factorizations, iterative solvers or training that failed numerically.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (unknown key, out-of-range value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or version-mismatched files.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace radiomap
