#pragma once

#include <stdexcept>
#include <string>

namespace fvmatch {

/// Base for all library errors. Validation errors map to CLI exit code 1,
/// numeric errors to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

// mesh
struct InvalidMesh : ValidationError {
  using ValidationError::ValidationError;
};
struct DegenerateTriangle : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyMesh : ValidationError {
  using ValidationError::ValidationError;
};

// fem
struct LengthMismatch : ValidationError {
  using ValidationError::ValidationError;
};
struct BadExponent : ValidationError {
  using ValidationError::ValidationError;
};
struct NonpositiveEpsilon : ValidationError {
  using ValidationError::ValidationError;
};

// varifold
struct NonUnitNormal : ValidationError {
  using ValidationError::ValidationError;
};
struct MeshMismatch : ValidationError {
  using ValidationError::ValidationError;
};

// surface
struct BadParams : ValidationError {
  using ValidationError::ValidationError;
};
struct BadStep : ValidationError {
  using ValidationError::ValidationError;
};
struct OutsideReach : NumericError {
  using NumericError::NumericError;
};
struct LiftMiss : NumericError {
  using NumericError::NumericError;
};
struct NoConvergence : NumericError {
  using NumericError::NumericError;
};

// matching
struct NonsmoothEnergy : ValidationError {
  using ValidationError::ValidationError;
};
struct WrongModel : ValidationError {
  using ValidationError::ValidationError;
};

// io / config
struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};
struct CountMismatch : ValidationError {
  using ValidationError::ValidationError;
};
struct IoError : ValidationError {
  using ValidationError::ValidationError;
};
struct ConfigError : ValidationError {
  using ValidationError::ValidationError;
};

}  // namespace fvmatch
