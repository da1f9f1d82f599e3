#pragma once

#include <stdexcept>
#include <string>

namespace tubescore {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed config, parameters outside their box, unsupported
// shapes. The CLI maps these to exit status 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A computation that could not be completed: singular information,
// quadrature failure, factorization failure. The CLI maps these to exit 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SupportViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnsupportedDimension : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EvaluationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonfiniteVariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateModel : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateFit : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ClassificationConflict : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class CurvatureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BracketError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IllConditionedKernel : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace tubescore
