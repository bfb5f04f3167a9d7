#pragma once

#include <cstdint>
#include <functional>

#include "typeflow/environment.hpp"
#include "typeflow/polynomial.hpp"
#include "typeflow/rng.hpp"
#include "typeflow/simplex_core.hpp"

namespace typeflow {

/// Drift generator: p A (grad f)'.
double apply_GA(const PolynomialTestFn& f, const SimplexPoint& p,
                const RateMatrix& a);

/// Wright-Fisher generator: 1/2 sum_ij p_i (delta_ij - p_j) d2f/dx_i dx_j.
double apply_GB(const PolynomialTestFn& f, const SimplexPoint& p);

double apply_GAB(const PolynomialTestFn& f, const SimplexPoint& p,
                 const RateMatrix& a);

/// Deterministic scaling limit of the internal-dynamics model:
/// x'(t) = A(t)' x(t), integrated by fixed-step RK4 (substepping across
/// environment jumps so each stage sees a single plateau). Output is a
/// piecewise-linear path on {0, h, 2h, ..., T}.
SimplexPath solve_limit_ode(const EnvPath& env, const SimplexPoint& x0,
                            double T, double h);

/// sigma with sigma sigma' = diag(p) - p p', via symmetric
/// eigendecomposition with roundoff-negative eigenvalues clamped to zero
/// (the coefficient matrix is singular on the simplex boundary).
Eigen::MatrixXd diffusion_matrix_sqrt(const SimplexPoint& p);

struct DiffusionConfig {
  EnvPath env;
  SimplexPoint x0;
  double horizon;
  double dt = 1e-3;
  std::uint64_t seed = 0;
};

/// Euler-Maruyama sampling of the limit diffusion: drift A(t)'x, noise
/// sigma(x) sqrt(dt) xi. After each step negatives are clamped to zero and
/// the point renormalized; a known O(sqrt(dt)) boundary artifact.
SimplexPath simulate_diffusion(const DiffusionConfig& cfg, Rng& rng);
SimplexPath simulate_diffusion(const DiffusionConfig& cfg);

/// Fixed-step RK4 for y' = deriv(A(t), y) over [t0, t1], splitting steps at
/// the environment's jump times; shared by the ODE limit and the moment
/// hierarchy.
Eigen::VectorXd rk4_env_advance(
    const EnvPath& env, double t0, double t1, double h_max,
    Eigen::VectorXd y,
    const std::function<Eigen::VectorXd(double t, const Eigen::MatrixXd& a,
                                        const Eigen::VectorXd& y)>& deriv);

}  // namespace typeflow
