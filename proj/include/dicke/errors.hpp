#pragma once

#include <stdexcept>
#include <string>

namespace dicke {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied argument or configuration breaks a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A state component became NaN or infinite during time stepping.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

// Closed-form expressions are singular at Gamma == kappa.
class DegenerateCoupling : public Error {
 public:
  using Error::Error;
};

// A closed form was requested outside the parameter range where it is real.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Signal too short for spectral analysis.
class TooShort : public Error {
 public:
  using Error::Error;
};

// Post-transient window did not contain enough maxima to count periods.
class TooFewMaxima : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace detail
}  // namespace dicke
