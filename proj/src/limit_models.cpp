#include "typeflow/limit_models.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace typeflow {

double apply_GA(const PolynomialTestFn& f, const SimplexPoint& p,
                const RateMatrix& a) {
  Eigen::VectorXd grad = f.gradient(p.coords());
  return p.coords().transpose() * a.entries() * grad;
}

double apply_GB(const PolynomialTestFn& f, const SimplexPoint& p) {
  Eigen::MatrixXd hess = f.hessian(p.coords());
  const Eigen::VectorXd& x = p.coords();
  double out = 0.0;
  for (int i = 0; i < p.types(); ++i)
    for (int j = 0; j < p.types(); ++j) {
      double b = x[i] * ((i == j ? 1.0 : 0.0) - x[j]);
      out += 0.5 * b * hess(i, j);
    }
  return out;
}

double apply_GAB(const PolynomialTestFn& f, const SimplexPoint& p,
                 const RateMatrix& a) {
  return apply_GA(f, p, a) + apply_GB(f, p);
}

Eigen::VectorXd rk4_env_advance(
    const EnvPath& env, double t0, double t1, double h_max,
    Eigen::VectorXd y,
    const std::function<Eigen::VectorXd(double t, const Eigen::MatrixXd& a,
                                        const Eigen::VectorXd& y)>& deriv) {
  const auto& breaks = env.breakpoints();
  const bool stepwise = env.kind() != EnvKind::ParametricSmooth;
  double t = t0;
  auto next_break = std::upper_bound(breaks.begin(), breaks.end(), t0);
  while (t < t1 - 1e-15) {
    double piece_end = t1;
    if (next_break != breaks.end() && *next_break < t1)
      piece_end = *next_break;
    // integrate [t, piece_end] with steps <= h_max; within a plateau the
    // matrix is fetched once so no stage reads across the jump
    long long nsub =
        std::max<long long>(1, (long long)(std::ceil((piece_end - t) / h_max - 1e-12)));
    double s = (piece_end - t) / double(nsub);
    Eigen::MatrixXd a_plateau;
    if (stepwise) a_plateau = env.evaluate(t).entries();
    for (long long i = 0; i < nsub; ++i) {
      double ta = t + double(i) * s;
      auto a_at = [&](double tt) -> Eigen::MatrixXd {
        if (stepwise) return a_plateau;
        return env.evaluate(tt).entries();
      };
      Eigen::VectorXd k1 = deriv(ta, a_at(ta), y);
      Eigen::VectorXd k2 = deriv(ta + 0.5 * s, a_at(ta + 0.5 * s),
                                 y + 0.5 * s * k1);
      Eigen::VectorXd k3 = deriv(ta + 0.5 * s, a_at(ta + 0.5 * s),
                                 y + 0.5 * s * k2);
      Eigen::VectorXd k4 = deriv(ta + s, a_at(ta + s), y + s * k3);
      y += (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    t = piece_end;
    if (next_break != breaks.end() && piece_end == *next_break) ++next_break;
  }
  return y;
}

SimplexPath solve_limit_ode(const EnvPath& env, const SimplexPoint& x0,
                            double T, double h) {
  if (h <= 0.0) throw ValidationError("ode", "step must be positive");
  if (T <= 0.0) throw ValidationError("ode", "horizon must be positive");
  if (env.horizon() < T) throw OutOfHorizon(T, env.horizon());

  auto deriv = [](double, const Eigen::MatrixXd& a,
                  const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return a.transpose() * y;
  };

  std::vector<double> grid;
  std::vector<SimplexPoint> points;
  Eigen::VectorXd y = x0.coords();
  grid.push_back(0.0);
  points.emplace_back(y);
  long long full = (long long)(std::floor(T / h + 1e-9));
  for (long long k = 1; k <= full; ++k) {
    double t1 = double(k) * h;
    y = rk4_env_advance(env, double(k - 1) * h, t1, h, y, deriv);
    grid.push_back(t1);
    points.emplace_back(y);
  }
  if (grid.back() < T - 1e-12) {
    y = rk4_env_advance(env, grid.back(), T, h, y, deriv);
    grid.push_back(T);
    points.emplace_back(y);
  }
  return SimplexPath(std::move(grid), std::move(points),
                     Interp::PiecewiseLinear);
}

Eigen::MatrixXd diffusion_matrix_sqrt(const SimplexPoint& p) {
  const Eigen::VectorXd& x = p.coords();
  Eigen::MatrixXd b = Eigen::MatrixXd(x.asDiagonal()) - x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

SimplexPath simulate_diffusion(const DiffusionConfig& cfg, Rng& rng) {
  if (cfg.dt <= 0.0) throw ValidationError("diffusion", "dt must be positive");
  if (cfg.horizon <= 0.0)
    throw ValidationError("diffusion", "horizon must be positive");
  if (cfg.env.horizon() < cfg.horizon)
    throw OutOfHorizon(cfg.horizon, cfg.env.horizon());

  const int r = cfg.x0.types();
  std::vector<double> grid{0.0};
  std::vector<SimplexPoint> points{cfg.x0};
  Eigen::VectorXd x = cfg.x0.coords();
  double t = 0.0;
  double sqdt = std::sqrt(cfg.dt);
  while (t < cfg.horizon - 1e-12) {
    double dt = std::min(cfg.dt, cfg.horizon - t);
    double sq = (dt == cfg.dt) ? sqdt : std::sqrt(dt);
    Eigen::MatrixXd a = cfg.env.evaluate(t).entries();
    Eigen::MatrixXd sigma = diffusion_matrix_sqrt(SimplexPoint(x));
    Eigen::VectorXd xi(r);
    for (int i = 0; i < r; ++i) xi[i] = rng.normal();
    x += dt * (a.transpose() * x) + sq * (sigma * xi);
    x = x.cwiseMax(0.0);
    double s = x.sum();
    if (s <= 0.0)
      throw Error("diffusion state collapsed to zero mass");
    x /= s;
    t += dt;
    grid.push_back(t);
    points.emplace_back(x);
  }
  return SimplexPath(std::move(grid), std::move(points),
                     Interp::PiecewiseLinear);
}

SimplexPath simulate_diffusion(const DiffusionConfig& cfg) {
  Rng rng(cfg.seed, 0);
  return simulate_diffusion(cfg, rng);
}

}  // namespace typeflow
