#pragma once

#include <stdexcept>
#include <string>

namespace sbt {

/// A point, argument or parameter lies outside the set where an operation is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The spectral parameter is outside the range where the object exists
/// (e.g. HyperbolicII requires |lambda| < epsilon * mu).
class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An integrator stage left the domain.
class StepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strict-mode SDE run recorded a boundary violation.
class BoundaryBreach : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A theorem test was asked to run outside the hypotheses it is proved under.
class HypothesisError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sbt
