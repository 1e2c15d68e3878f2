#pragma once

#include <stdexcept>
#include <string>

namespace imkit {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input lies outside the domain of an operation (bad parameter, open-bound violation).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A finite-difference stencil would cross a parameter boundary.
class StencilError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Data not in the range of the forward map for the given parameter.
class InversionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// An operation was called without its documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (divergence, quadrature, rank, reachability).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Picard iterate left the ball B_b(u0).
class DomainExitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Characteristic did not reach the reference slice.
class ReachError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Traced invariants are not functionally independent.
class DependenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A focal set Theta_x(S) turned out empty; the framework assumes it never is.
class EmptyFocalSetError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A partial derivative required as a denominator vanished on the test grid.
class SingularModelError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Too many grid points were excluded for a test to reach a verdict.
class InconclusiveError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace imkit
