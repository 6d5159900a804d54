#pragma once

#include <stdexcept>
#include <string>

namespace cpr {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes incompatible with an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A parameter or input name that is not bound.
class UnknownNameError : public Error {
 public:
  using Error::Error;
};

/// Operand outside the mathematical domain of an op (log of a nonpositive
/// value, division by zero, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// gradient() called on an expression whose value is not a scalar.
class NonScalarError : public Error {
 public:
  using Error::Error;
};

/// Invalid run or module configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a failed numeric check.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Base of file and dataset errors.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpr
