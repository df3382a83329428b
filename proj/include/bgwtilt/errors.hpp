#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bgwtilt {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad family files, invalid arguments, violated preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

// Evaluation outside the region where a quantity is defined
// (tilt overflow guard, analytic radius of convergence, log of zero).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An enumeration or combinatorial budget would be exceeded.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// An iterative method hit its cap. `last` carries the final iterate or bounds.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last)
      : Error(what), last_(std::move(last)) {}
  const std::vector<double>& last() const { return last_; }

 private:
  std::vector<double> last_;
};

// The constrained ascent could not reach a maximizer within its budget.
// `trajectory` is a human-readable summary of the visited iterates.
class SolverDivergence : public Error {
 public:
  SolverDivergence(const std::string& what, std::vector<std::string> trajectory)
      : Error(what), trajectory_(std::move(trajectory)) {}
  const std::vector<std::string>& trajectory() const { return trajectory_; }

 private:
  std::vector<std::string> trajectory_;
};

// A constrained critical point was found whose direction satisfies
// Gamma X* = lambda Gamma X only with lambda <= 0.
class NegativeScaleError : public Error {
 public:
  NegativeScaleError(const std::string& what, double lambda) : Error(what), lambda_(lambda) {}
  double lambda() const { return lambda_; }

 private:
  double lambda_;
};

}  // namespace bgwtilt
