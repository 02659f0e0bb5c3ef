#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mdpstat {

/// Base class for every exception thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A model, table, or argument fails a structural check (shape mismatch,
/// transition row not summing to one, discount outside (0,1), ...).
struct ModelError : Error {
  using Error::Error;
};

/// A statistical assumption required by an asymptotic formula does not hold
/// for the given inputs.  The numbered assumptions are listed in
/// inference.hpp.
struct AssumptionError : Error {
  using Error::Error;
};

/// An estimator or covariance routine was asked to use state-action pairs
/// that appear nowhere in the data.
struct UnvisitedError : Error {
  UnvisitedError(const std::string& what, std::vector<int> pairs_)
      : Error(what), pairs(std::move(pairs_)) {}
  std::vector<int> pairs;  // flat (s,a) indices that were never visited
};

/// An iterative solver stopped before reaching its tolerance.
struct SolverError : Error {
  SolverError(const std::string& what, double residual_, int iterations_)
      : Error(what), residual(residual_), iterations(iterations_) {}
  double residual = 0.0;
  int iterations = 0;
};

struct LpInfeasibleError : Error {
  using Error::Error;
};

struct LpUnboundedError : Error {
  using Error::Error;
};

/// An optimum is degenerate in a way that breaks a downstream construction
/// (for example more than one randomized state in an occupancy solution).
struct DegeneracyError : Error {
  using Error::Error;
};

/// A definition file, dataset, or report failed to parse.
struct IoError : Error {
  using Error::Error;
};

/// A run configuration is missing or inconsistent.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace mdpstat
