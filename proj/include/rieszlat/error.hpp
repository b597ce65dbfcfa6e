#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rieszlat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments: unknown names, out-of-range parameters, malformed files.
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnknownLatticeError : public DomainError {
 public:
  using DomainError::DomainError;
};

class SingularBasisError : public Error {
 public:
  using Error::Error;
};

/// Raised before an enumeration whose estimated size exceeds the budget.
class BudgetExceededError : public Error {
 public:
  BudgetExceededError(double estimated, double budget)
      : Error("enumeration budget exceeded: estimated " + std::to_string(estimated) +
              " points, budget " + std::to_string(budget)),
        estimated_(estimated) {}
  double estimated() const noexcept { return estimated_; }

 private:
  double estimated_;
};

/// A shell series does not reach far enough to certify a lattice sum.
class InsufficientShellsError : public Error {
 public:
  InsufficientShellsError(double have, double required)
      : Error("shell series complete up to norm " + std::to_string(have) +
              " but norm " + std::to_string(required) + " is required"),
        required_(required) {}
  double required_max_norm() const noexcept { return required_; }

 private:
  double required_;
};

class NonconvergenceError : public Error {
 public:
  using Error::Error;
};

/// Two points coincide on the torus, or the evaluation point lies on the lattice.
class CoincidentPointsError : public Error {
 public:
  using Error::Error;
};

class LineSearchError : public Error {
 public:
  using Error::Error;
};

}  // namespace rieszlat
