#pragma once

#include <stdexcept>
#include <string>

namespace qmcflux {

/// Invalid argument or precondition violation detected at an API boundary.
class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A request exceeds a hard size limit (subset enumeration, derivative order).
class CapacityError : public std::length_error {
public:
  using std::length_error::length_error;
};

/// Parameters fall outside the regime where the convergence theory applies (e.g. σp ≥ 1).
class TheoryViolation : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// The weight integral diverges (α_j ≤ b_j).
class InfeasibilityError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Generating-vector file has fewer components than requested.
class TruncationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Generating vector violates a structural invariant.
class ValidityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Subdomain is not a union of mesh elements.
class AlignmentError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Random-field configuration cannot produce a positive coefficient.
class ModelInvalid : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, double residual, long iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  long iterations() const noexcept { return iterations_; }

private:
  double residual_;
  long iterations_;
};

} // namespace qmcflux
