#pragma once

#include <stdexcept>
#include <string>

namespace rdif {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input bytes (JSON/CSV syntax, missing fields, bad numbers).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates a type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical preconditions that indicate a problem upstream of the call.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateSlopeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class VarianceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StationaryStartError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoUsableItemsError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularMatrixError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateItemError : public NumericalError {
 public:
  DegenerateItemError(std::size_t item, const std::string& what)
      : NumericalError(what), item_(item) {}
  std::size_t item() const { return item_; }

 private:
  std::size_t item_;
};

}  // namespace rdif
