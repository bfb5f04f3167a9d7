#pragma once

#include <functional>
#include <vector>

#include "typeflow/environment.hpp"
#include "typeflow/simplex_core.hpp"

namespace typeflow {

/// All multi-indices of total degree n in r coordinates, sorted strictly
/// decreasing: alpha precedes alpha' iff its first differing coordinate is
/// larger. Size is binomial(n+r-1, n).
struct MultiIndexSet {
  int order;
  int dim;
  std::vector<std::vector<int>> indices;

  static MultiIndexSet build(int n, int r);
  std::size_t size() const { return indices.size(); }
  int position(const std::vector<int>& alpha) const;
};

MultiIndexSet enum_multi_indices(int n, int r);

/// Moment vector y_n(t) on a time grid, components ordered as
/// MultiIndexSet(n, r).
struct MomentBlock {
  int order = 0;
  std::vector<double> grid;
  std::vector<Eigen::VectorXd> values;

  const Eigen::VectorXd& at_time(double t) const;
};

/// Degree-n drift matrix: diagonal sum_j alpha_j a_jj, entry (alpha,
/// alpha - e_j + e_k) equal to alpha_j a_kj.
Eigen::MatrixXd build_An(const Eigen::MatrixXd& a, int n);
Eigen::MatrixXd build_An(const RateMatrix& a, int n);

/// Diagonal resampling contraction (n - n^2)/2 per moment of degree n.
Eigen::MatrixXd build_Bn(int n, int r);

/// Degree-lowering coupling: entry (alpha, alpha - e_i) equal to
/// alpha_i (alpha_i - 1)/2. Defined for n >= 2.
Eigen::MatrixXd build_Dn(int n, int r);

inline constexpr int kMaxMomentOrder = 6;

std::vector<Eigen::VectorXd> point_mass_initial_moments(const SimplexPoint& x0,
                                                        int n_max);
std::vector<Eigen::VectorXd> dirichlet_initial_moments(
    const Eigen::VectorXd& alpha, int n_max);

/// Residual of the conservation identity
///   sum_alpha multinomial(n; alpha) y_n^alpha = 1.
double normalization_residual(int n, int r, const Eigen::VectorXd& y);

/// Integrate the moment system
///   y_1' = A1(t) y_1,   y_n' = Dn y_{n-1} + (An(t) + Bn) y_n
/// for n = 1..n_max with RK4 (lower blocks feed upper blocks). y_init gives
/// the blocks at t = 0, orders 1..n_max.
std::vector<MomentBlock> solve_moment_hierarchy(
    const EnvPath& env, const std::vector<Eigen::VectorXd>& y_init, double T,
    double h);

/// Second-kind Volterra marching solver for
///   x(s) = f(s) + integral_0^s V(s,t) x(t) dt
/// by trapezoidal product integration on the step-h grid.
std::vector<Eigen::VectorXd> volterra_solve(
    const std::function<Eigen::MatrixXd(double s, double t)>& kernel,
    const std::function<Eigen::VectorXd(double s)>& forcing, double T,
    double h);

/// The moment system solved in its explicit Volterra form, block by block,
/// with each solved block feeding the next forcing term.
std::vector<MomentBlock> volterra_hierarchy_solve(
    const EnvPath& env, const std::vector<Eigen::VectorXd>& y_init, double T,
    double h);

}  // namespace typeflow
