#pragma once

#include <stdexcept>
#include <string>

namespace transhoi {

// Everything thrown by the library derives from Error. ValidationError and
// its children map to CLI exit code 1, everything else to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct ConstraintError : Error {
  using Error::Error;
};

struct GeometryError : ValidationError {
  using ValidationError::ValidationError;
};

struct VocabError : ValidationError {
  using ValidationError::ValidationError;
};

struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};

struct CompatibilityError : ValidationError {
  using ValidationError::ValidationError;
};

struct SamplingError : Error {
  using Error::Error;
};

struct PairingError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

}  // namespace transhoi
