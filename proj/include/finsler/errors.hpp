#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed caller input: dimension mismatches, bad options, bad schemas.
struct InputError : Error {
  using Error::Error;
};

// Expression source that does not parse; carries the offending position.
struct ParseError : Error {
  int line, col;
  ParseError(const std::string& msg, int line_, int col_)
      : Error(msg), line(line_), col(col_) {}
};

// Expression evaluation outside a function's domain (log of a non-positive
// value, fractional power of a negative base, ...).
struct EvalError : Error {
  using Error::Error;
};

// Point outside the metric's chart domain.
struct DomainError : Error {
  using Error::Error;
};

// Fiber coordinate too close to the zero section for derivative work.
struct ZeroSectionError : Error {
  using Error::Error;
};

// Fundamental tensor failed to be positive definite, or a norm candidate
// failed validation (homogeneity, positivity).
struct ConvexityError : Error {
  using Error::Error;
};

// Singular linear systems, non-finite intermediates.
struct NumericalError : Error {
  using Error::Error;
};

// Integrator quality failure (norm drift beyond tolerance, step trouble).
struct IntegrationError : Error {
  using Error::Error;
};

// Geodesic left the chart domain; carries the last in-domain state.
struct DomainExitError : Error {
  std::vector<double> exit_point;
  double exit_time;
  DomainExitError(const std::string& msg, std::vector<double> p, double t)
      : Error(msg), exit_point(std::move(p)), exit_time(t) {}
};

// Boundary-value solve failed to converge after all restarts.
struct NoGeodesicError : Error {
  double best_residual;
  NoGeodesicError(const std::string& msg, double r) : Error(msg), best_residual(r) {}
};

}  // namespace finsler
