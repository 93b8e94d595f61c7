#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched matrix/vector dimensions.
struct DimensionError : Error {
  using Error::Error;
};

// Argument outside the mathematical domain of an operation
// (negative time, invalid distribution parameter, probability outside [0,1], ...).
struct DomainError : Error {
  using Error::Error;
};

// Model failed validation; message lists the offending fields.
struct InvalidModelError : Error {
  using Error::Error;
};

// Numerical kernel failure: overflow, non-finite intermediate, eigensolver
// non-convergence.
struct NumericalError : Error {
  using Error::Error;
};

// Adaptive quadrature exhausted its panel budget before reaching tolerance.
struct QuadratureError : Error {
  QuadratureError(const std::string& what, double achieved)
      : Error(what), achieved_error(achieved) {}
  double achieved_error;
};

// Expectation integrand grows faster than the distribution tail decays.
struct DivergenceError : Error {
  using Error::Error;
};

// Stationary moments do not exist: per-cycle contraction has spectral radius >= 1.
struct InstabilityError : Error {
  InstabilityError(const std::string& what, double rho, int moment_order)
      : Error(what), spectral_radius(rho), order(moment_order) {}
  double spectral_radius;
  int order;
};

}  // namespace pdmp
