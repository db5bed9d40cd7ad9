#pragma once

#include <stdexcept>
#include <string>

namespace rpkin {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violation: bad index set, negative rate, malformed input.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Trace at or below the floor: every pair has reacted and rho/Tr(rho) is undefined.
class NormalizationSingular : public Error {
 public:
  using Error::Error;
};

/// A right-hand side evaluated at a point where the model itself is undefined.
class ModelSingular : public Error {
 public:
  using Error::Error;
};

/// f_0 + f_T vanished, so the mixture weights cannot be formed.
class AllReacted : public Error {
 public:
  using Error::Error;
};

/// The two algebraic forms of the weight derivative disagree: the state handed
/// in is not a member of the kinetic mixture family.
class MixtureInconsistent : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

class StepSizeUnderflow : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

class PositivityViolation : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

}  // namespace rpkin
