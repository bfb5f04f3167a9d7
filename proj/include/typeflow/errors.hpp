#pragma once

#include <stdexcept>
#include <string>

namespace typeflow {

/// Base class for all typeflow errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NegativeOffDiagonal : Error {
  int i, j;
  double value;
  NegativeOffDiagonal(int i_, int j_, double v)
      : Error("rate matrix off-diagonal (" + std::to_string(i_) + "," +
              std::to_string(j_) + ") is negative: " + std::to_string(v)),
        i(i_), j(j_), value(v) {}
};

struct RowSumNonzero : Error {
  int row;
  double residual;
  RowSumNonzero(int row_, double res)
      : Error("rate matrix row " + std::to_string(row_) +
              " does not sum to zero, residual " + std::to_string(res)),
        row(row_), residual(res) {}
};

struct PopulationTooSmall : Error {
  long long population;
  double minimum;
  PopulationTooSmall(long long n, double n_min)
      : Error("population " + std::to_string(n) +
              " too small for a stochastic transition matrix, need at least " +
              std::to_string(n_min)),
        population(n), minimum(n_min) {}
};

struct OutOfHorizon : Error {
  double t, horizon;
  OutOfHorizon(double t_, double h)
      : Error("time " + std::to_string(t_) + " outside environment horizon " +
              std::to_string(h)),
        t(t_), horizon(h) {}
};

struct DomainTooShort : Error {
  using Error::Error;
};

struct HorizonExceeded : Error {
  using Error::Error;
};

struct GridMismatch : Error {
  using Error::Error;
};

struct DegreeTooHigh : Error {
  int degree;
  explicit DegreeTooHigh(int d)
      : Error("polynomial degree " + std::to_string(d) + " above cap"),
        degree(d) {}
};

struct DegreeTooLow : Error {
  using Error::Error;
};

struct EnumerationTooLarge : Error {
  using Error::Error;
};

struct SingularStep : Error {
  using Error::Error;
};

struct InconsistentInitialMoments : Error {
  using Error::Error;
};

struct DegenerateFit : Error {
  using Error::Error;
};

struct ParseError : Error {
  int line;
  ParseError(int line_, const std::string& msg)
      : Error("parse error at line " + std::to_string(line_) + ": " + msg),
        line(line_) {}
};

struct ValidationError : Error {
  std::string field;
  ValidationError(const std::string& field_, const std::string& msg)
      : Error("invalid '" + field_ + "': " + msg), field(field_) {}
};

}  // namespace typeflow
