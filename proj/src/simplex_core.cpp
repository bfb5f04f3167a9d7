#include "typeflow/simplex_core.hpp"

#include <algorithm>
#include <cmath>

namespace typeflow {

RateMatrix validate_rate_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw ValidationError("rate_matrix", "matrix not square");
  const int r = int(m.rows());
  if (r < 2) throw ValidationError("rate_matrix", "need at least 2 types");
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (i != j && m(i, j) < 0.0) throw NegativeOffDiagonal(i, j, m(i, j));
  for (int i = 0; i < r; ++i) {
    double s = m.row(i).sum();
    if (std::abs(s) > kRowSumTol) throw RowSumNonzero(i, s);
  }
  return RateMatrix(m);
}

StochasticMatrix validate_stochastic_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw ValidationError("stochastic_matrix", "matrix not square");
  const int r = int(m.rows());
  if (r < 2)
    throw ValidationError("stochastic_matrix", "need at least 2 types");
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (m(i, j) < 0.0 || m(i, j) > 1.0)
        throw ValidationError("stochastic_matrix",
                              "entry (" + std::to_string(i) + "," +
                                  std::to_string(j) + ") outside [0,1]: " +
                                  std::to_string(m(i, j)));
  for (int i = 0; i < r; ++i) {
    double s = m.row(i).sum();
    if (std::abs(s - 1.0) > kStochasticRowTol)
      throw ValidationError("stochastic_matrix",
                            "row " + std::to_string(i) +
                                " sums to " + std::to_string(s));
  }
  return StochasticMatrix(m);
}

StochasticMatrix internal_transition_matrix(const RateMatrix& a, long long n) {
  double n_min = a.min_population();
  if (double(n) < n_min) throw PopulationTooSmall(n, n_min);
  Eigen::MatrixXd p =
      Eigen::MatrixXd::Identity(a.types(), a.types()) +
      a.entries() / double(n);
  // Clip roundoff at the boundary; entries are in [0,1] by construction.
  p = p.cwiseMax(0.0).cwiseMin(1.0);
  return validate_stochastic_matrix(p);
}

TypeCounts::TypeCounts(VecI counts, long long population)
    : counts_(std::move(counts)), population_(population) {
  if (population_ < 2)
    throw ValidationError("type_counts", "population must be >= 2");
  if (counts_.size() < 2)
    throw ValidationError("type_counts", "need at least 2 types");
  long long total = 0;
  for (int i = 0; i < counts_.size(); ++i) {
    if (counts_[i] < 0)
      throw ValidationError("type_counts",
                            "negative count at " + std::to_string(i));
    total += counts_[i];
  }
  if (total != population_)
    throw ValidationError("type_counts",
                          "counts sum to " + std::to_string(total) +
                              ", expected " + std::to_string(population_));
}

SimplexPoint::SimplexPoint(Eigen::VectorXd coords)
    : coords_(std::move(coords)) {
  if (coords_.size() < 2)
    throw ValidationError("simplex_point", "need at least 2 coordinates");
  for (int i = 0; i < coords_.size(); ++i) {
    if (coords_[i] < 0.0) {
      if (coords_[i] > -1e-12) {
        coords_[i] = 0.0;  // roundoff from upstream arithmetic
      } else {
        throw ValidationError("simplex_point", "negative coordinate " +
                                                   std::to_string(coords_[i]));
      }
    }
  }
  double s = coords_.sum();
  if (std::abs(s - 1.0) > kSimplexSumTol)
    throw ValidationError("simplex_point",
                          "coordinates sum to " + std::to_string(s));
}

SimplexPoint SimplexPoint::vertex(int r, int i) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(r);
  v[i] = 1.0;
  return SimplexPoint(v);
}

SimplexPoint SimplexPoint::uniform(int r) {
  return SimplexPoint(Eigen::VectorXd::Constant(r, 1.0 / double(r)));
}

SimplexPoint counts_to_point(const TypeCounts& c) {
  return SimplexPoint(c.counts().cast<double>() / double(c.population()));
}

TypeCounts point_to_counts(const SimplexPoint& p, long long n) {
  VecI counts(p.types());
  long long total = 0;
  int imax = 0;
  double cmax = -1.0;
  for (int i = 0; i < p.types(); ++i) {
    counts[i] = std::llround(p[i] * double(n));
    total += counts[i];
    if (p[i] > cmax) {
      cmax = p[i];
      imax = i;
    }
  }
  counts[imax] += n - total;  // absorb rounding drift in the largest bin
  return TypeCounts(counts, n);
}

SimplexPath::SimplexPath(std::vector<double> grid,
                         std::vector<SimplexPoint> points, Interp interp)
    : grid_(std::move(grid)), points_(std::move(points)), interp_(interp) {
  if (grid_.empty() || grid_.size() != points_.size())
    throw ValidationError("simplex_path", "grid/point length mismatch");
  if (grid_.front() != 0.0)
    throw ValidationError("simplex_path", "grid must start at 0");
  for (std::size_t k = 1; k < grid_.size(); ++k)
    if (grid_[k] <= grid_[k - 1])
      throw ValidationError("simplex_path", "grid not strictly increasing");
  const int r = points_.front().types();
  for (const auto& p : points_)
    if (p.types() != r)
      throw ValidationError("simplex_path", "inconsistent dimension");
}

Eigen::VectorXd SimplexPath::evaluate(double t) const {
  if (t < 0.0 || t > grid_.back() + 1e-12)
    throw GridMismatch("time " + std::to_string(t) +
                       " outside path domain [0, " +
                       std::to_string(grid_.back()) + "]");
  t = std::min(t, grid_.back());
  auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  std::size_t k = std::size_t(it - grid_.begin());  // first index with grid > t
  if (k == grid_.size()) return points_.back().coords();
  if (k == 0) return points_.front().coords();
  if (interp_ == Interp::PiecewiseConstant) return points_[k - 1].coords();
  double w = (t - grid_[k - 1]) / (grid_[k] - grid_[k - 1]);
  return (1.0 - w) * points_[k - 1].coords() + w * points_[k].coords();
}

double path_distance_dU(const MatrixPathView& x, const MatrixPathView& y,
                        double u_max) {
  if (u_max <= 0.0) throw ValidationError("u_max", "must be positive");
  if (x.horizon < u_max || y.horizon < u_max)
    throw DomainTooShort("paths must be evaluable on [0, " +
                         std::to_string(u_max) + "]");

  // Integration nodes: uniform grid plus both paths' jump times.
  std::vector<double> nodes;
  std::size_t n_grid = std::size_t(std::ceil(u_max / kDuGridStep));
  nodes.reserve(n_grid + x.breakpoints.size() + y.breakpoints.size() + 2);
  for (std::size_t k = 0; k <= n_grid; ++k)
    nodes.push_back(std::min(double(k) * kDuGridStep, u_max));
  for (double b : x.breakpoints)
    if (b >= 0.0 && b <= u_max) nodes.push_back(b);
  for (double b : y.breakpoints)
    if (b >= 0.0 && b <= u_max) nodes.push_back(b);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  auto gap = [&](double t) {
    double d = (x.value(t) - y.value(t)).norm();  // Frobenius
    return std::min(d, 1.0);
  };

  // Running sup of the truncated gap; e^(-u)-weighted integral with the
  // sup linearly interpolated between nodes (exact for step paths).
  double total = 0.0;
  double sup = gap(nodes.front());
  double prev_u = nodes.front();
  double prev_m = sup;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    double u = nodes[k];
    sup = std::max(sup, gap(u));
    double m = sup;
    double ea = std::exp(-prev_u), eb = std::exp(-u);
    double e0 = ea - eb;                                // int e^-u
    double e1 = (prev_u + 1.0) * ea - (u + 1.0) * eb;   // int u e^-u
    double du = u - prev_u;
    double slope = du > 0.0 ? (m - prev_m) / du : 0.0;
    total += prev_m * e0 + slope * (e1 - prev_u * e0);
    prev_u = u;
    prev_m = m;
  }
  return total;
}

}  // namespace typeflow
