#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "typeflow/errors.hpp"

namespace typeflow {

using VecI = Eigen::Matrix<long long, Eigen::Dynamic, 1>;

inline constexpr double kRowSumTol = 1e-12;
inline constexpr double kStochasticRowTol = 1e-12;
inline constexpr double kSimplexSumTol = 1e-10;

/// Q-matrix: off-diagonals >= 0, rows sum to zero. Immutable once built.
class RateMatrix {
 public:
  int types() const { return int(m_.rows()); }
  const Eigen::MatrixXd& entries() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  /// Smallest population size for which I + A/N is stochastic,
  /// i.e. max_i |a_ii|.
  double min_population() const { return -m_.diagonal().minCoeff(); }

  friend RateMatrix validate_rate_matrix(const Eigen::MatrixXd& m);

 private:
  explicit RateMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

RateMatrix validate_rate_matrix(const Eigen::MatrixXd& m);

/// Row-stochastic matrix.
class StochasticMatrix {
 public:
  int types() const { return int(m_.rows()); }
  const Eigen::MatrixXd& entries() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  Eigen::RowVectorXd row(int i) const { return m_.row(i); }

  friend StochasticMatrix validate_stochastic_matrix(const Eigen::MatrixXd& m);

 private:
  explicit StochasticMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

StochasticMatrix validate_stochastic_matrix(const Eigen::MatrixXd& m);

/// P = I + A/N. Throws PopulationTooSmall when the result would leave [0,1].
StochasticMatrix internal_transition_matrix(const RateMatrix& a, long long n);

/// Occupancy vector over r types summing exactly to the population size.
class TypeCounts {
 public:
  TypeCounts(VecI counts, long long population);

  int types() const { return int(counts_.size()); }
  long long population() const { return population_; }
  const VecI& counts() const { return counts_; }
  long long operator[](int i) const { return counts_[i]; }

 private:
  VecI counts_;
  long long population_;
};

/// Nonnegative coordinates summing to one (within kSimplexSumTol).
class SimplexPoint {
 public:
  explicit SimplexPoint(Eigen::VectorXd coords);

  int types() const { return int(coords_.size()); }
  const Eigen::VectorXd& coords() const { return coords_; }
  double operator[](int i) const { return coords_[i]; }

  static SimplexPoint vertex(int r, int i);
  static SimplexPoint uniform(int r);

 private:
  Eigen::VectorXd coords_;
};

SimplexPoint counts_to_point(const TypeCounts& c);

/// Nearest integer counts: exact inverse of counts_to_point.
TypeCounts point_to_counts(const SimplexPoint& p, long long n);

enum class Interp { PiecewiseConstant, PiecewiseLinear };

/// Time-gridded simplex path. Chains use piecewise-constant (cadlag)
/// interpolation; limit solutions piecewise-linear.
class SimplexPath {
 public:
  SimplexPath(std::vector<double> grid, std::vector<SimplexPoint> points,
              Interp interp);

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<SimplexPoint>& points() const { return points_; }
  Interp interpolation() const { return interp_; }
  int types() const { return points_.front().types(); }
  double horizon() const { return grid_.back(); }
  std::size_t size() const { return grid_.size(); }

  /// Value at time t in [0, horizon]. Piecewise-constant lookup is
  /// right-continuous.
  Eigen::VectorXd evaluate(double t) const;

 private:
  std::vector<double> grid_;
  std::vector<SimplexPoint> points_;
  Interp interp_;
};

/// A matrix-valued path on [0, horizon] with known jump locations; the
/// evaluation form shared by environments when computing path distances.
struct MatrixPathView {
  std::function<Eigen::MatrixXd(double)> value;
  std::vector<double> breakpoints;  // sorted jump times
  double horizon = 0.0;
};

inline constexpr double kDuGridStep = 0.01;
inline constexpr double kDuDefaultUMax = 40.0;  // tail mass <= e^-40

/// Exponentially weighted uniform distance between matrix paths,
///   integral of e^(-u) * sup_{t<=u} (||x(t)-y(t)||_F ^ 1) du
/// truncated at u_max. The integrand's sup is evaluated on the union of
/// both paths' breakpoints and a uniform u-grid; between nodes the sup is
/// interpolated linearly and the e^(-u) weight integrated exactly, so
/// constant-gap paths are computed to full precision.
double path_distance_dU(const MatrixPathView& x, const MatrixPathView& y,
                        double u_max = kDuDefaultUMax);

}  // namespace typeflow
