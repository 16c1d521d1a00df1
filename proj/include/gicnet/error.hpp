#pragma once

#include <stdexcept>
#include <string>

namespace gicnet {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Input could not be parsed (malformed JSON, wrong value types).
class ParseError : public Error {
  public:
    using Error::Error;
};

// A model invariant does not hold. CLI exit code 2.
class ValidationError : public Error {
  public:
    using Error::Error;
};

class DanglingReferenceError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class SchemaError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

// Numerical solver failure (singular system, singular Jacobian). CLI exit code 3.
class SolverError : public Error {
  public:
    using Error::Error;
};

class SingularSystemError : public SolverError {
  public:
    using SolverError::SolverError;
};

class MissingWindingError : public Error {
  public:
    using Error::Error;
};

// NaN or infinity in a network activation or loss.
class NonFiniteError : public Error {
  public:
    using Error::Error;
};

// backward() on a value that no differentiable input reaches.
class DetachedTensorError : public Error {
  public:
    using Error::Error;
};

}  // namespace gicnet
