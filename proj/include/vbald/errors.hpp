#pragma once

#include <stdexcept>
#include <string>

namespace vbald {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector length does not match the operator dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, or a quantity left its admissible range.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite() : NumericalError("matrix not positive definite") {}
  explicit NotPositiveDefinite(const std::string& what) : NumericalError(what) {}
};

/// Raised by the Beta prior fit when the first two moments describe a
/// (numerically) zero-variance spectrum.
class DegenerateMoments : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An exponent in the dual integrand exceeded the representable range.
class QuadratureOverflow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace vbald
