#pragma once

#include <stdexcept>
#include <string>

namespace nlos {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched or degenerate tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Hyperparameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input values outside the domain of an operation (e.g. negative counts).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// NaN, singular systems, failed contraction and similar numerical breakdowns.
/// The CLI maps this to exit code 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File-system and format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlos
