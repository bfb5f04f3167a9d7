#include "typeflow/moment_hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/LU>

#include "typeflow/limit_models.hpp"

namespace typeflow {

MultiIndexSet MultiIndexSet::build(int n, int r) {
  if (n < 1) throw ValidationError("multi_index", "order must be >= 1");
  if (r < 2) throw ValidationError("multi_index", "dimension must be >= 2");
  MultiIndexSet set;
  set.order = n;
  set.dim = r;
  std::vector<int> cur(std::size_t(r), 0);
  // descending first coordinate gives exactly the '>' order
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == r - 1) {
      cur[std::size_t(pos)] = remaining;
      set.indices.push_back(cur);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      cur[std::size_t(pos)] = v;
      rec(pos + 1, remaining - v);
    }
  };
  rec(0, n);
  return set;
}

MultiIndexSet enum_multi_indices(int n, int r) {
  return MultiIndexSet::build(n, r);
}

int MultiIndexSet::position(const std::vector<int>& alpha) const {
  auto cmp = [](const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(),
                                        a.end());  // descending
  };
  auto it = std::lower_bound(indices.begin(), indices.end(), alpha, cmp);
  if (it == indices.end() || *it != alpha)
    throw ValidationError("multi_index", "index not in set");
  return int(it - indices.begin());
}

const Eigen::VectorXd& MomentBlock::at_time(double t) const {
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (std::abs(grid[k] - t) < 1e-9) return values[k];
  throw GridMismatch("time " + std::to_string(t) + " not on moment grid");
}

Eigen::MatrixXd build_An(const Eigen::MatrixXd& a, int n) {
  const int r = int(a.rows());
  MultiIndexSet set = MultiIndexSet::build(n, r);
  const int c = int(set.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(c, c);
  for (int row = 0; row < c; ++row) {
    const auto& alpha = set.indices[std::size_t(row)];
    double diag = 0.0;
    for (int j = 0; j < r; ++j) diag += double(alpha[std::size_t(j)]) * a(j, j);
    out(row, row) = diag;
    for (int j = 0; j < r; ++j) {
      if (alpha[std::size_t(j)] == 0) continue;
      for (int k = 0; k < r; ++k) {
        if (k == j) continue;
        std::vector<int> target = alpha;
        target[std::size_t(j)] -= 1;
        target[std::size_t(k)] += 1;
        out(row, set.position(target)) = double(alpha[std::size_t(j)]) * a(k, j);
      }
    }
  }
  return out;
}

Eigen::MatrixXd build_An(const RateMatrix& a, int n) {
  return build_An(a.entries(), n);
}

Eigen::MatrixXd build_Bn(int n, int r) {
  const int c = int(MultiIndexSet::build(n, r).size());
  double v = 0.5 * (double(n) - double(n) * double(n));
  return Eigen::MatrixXd::Identity(c, c) * v;
}

Eigen::MatrixXd build_Dn(int n, int r) {
  if (n < 2) throw DegreeTooLow("D matrices start at order 2");
  MultiIndexSet hi = MultiIndexSet::build(n, r);
  MultiIndexSet lo = MultiIndexSet::build(n - 1, r);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(long(hi.size()), long(lo.size()));
  for (int row = 0; row < int(hi.size()); ++row) {
    const auto& alpha = hi.indices[std::size_t(row)];
    for (int i = 0; i < r; ++i) {
      int ai = alpha[std::size_t(i)];
      if (ai < 1) continue;
      std::vector<int> target = alpha;
      target[std::size_t(i)] -= 1;
      out(row, lo.position(target)) = 0.5 * double(ai) * double(ai - 1);
    }
  }
  return out;
}

namespace {

double multinomial_coeff(const std::vector<int>& alpha) {
  double out = 1.0;
  int used = 0;
  for (int a : alpha)
    for (int k = 1; k <= a; ++k) out *= double(++used) / double(k);
  return out;
}

}  // namespace

double normalization_residual(int n, int r, const Eigen::VectorXd& y) {
  MultiIndexSet set = MultiIndexSet::build(n, r);
  double total = 0.0;
  for (std::size_t k = 0; k < set.size(); ++k)
    total += multinomial_coeff(set.indices[k]) * y[long(k)];
  return std::abs(total - 1.0);
}

std::vector<Eigen::VectorXd> point_mass_initial_moments(const SimplexPoint& x0,
                                                        int n_max) {
  std::vector<Eigen::VectorXd> out;
  for (int n = 1; n <= n_max; ++n) {
    MultiIndexSet set = MultiIndexSet::build(n, x0.types());
    Eigen::VectorXd y(long(set.size()));
    for (std::size_t k = 0; k < set.size(); ++k) {
      double v = 1.0;
      for (int i = 0; i < x0.types(); ++i)
        for (int e = 0; e < set.indices[k][std::size_t(i)]; ++e) v *= x0[i];
      y[long(k)] = v;
    }
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<Eigen::VectorXd> dirichlet_initial_moments(
    const Eigen::VectorXd& alpha, int n_max) {
  if (alpha.minCoeff() <= 0.0)
    throw ValidationError("dirichlet", "parameters must be positive");
  const int r = int(alpha.size());
  double a0 = alpha.sum();
  std::vector<Eigen::VectorXd> out;
  for (int n = 1; n <= n_max; ++n) {
    MultiIndexSet set = MultiIndexSet::build(n, r);
    Eigen::VectorXd y(long(set.size()));
    for (std::size_t k = 0; k < set.size(); ++k) {
      double num = 1.0;
      for (int i = 0; i < r; ++i)
        for (int e = 0; e < set.indices[k][std::size_t(i)]; ++e)
          num *= alpha[i] + double(e);
      double den = 1.0;
      for (int e = 0; e < n; ++e) den *= a0 + double(e);
      y[long(k)] = num / den;
    }
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<MomentBlock> solve_moment_hierarchy(
    const EnvPath& env, const std::vector<Eigen::VectorXd>& y_init, double T,
    double h) {
  const int n_max = int(y_init.size());
  if (n_max < 1) throw ValidationError("hierarchy", "need at least order 1");
  if (n_max > kMaxMomentOrder)
    throw ValidationError("hierarchy", "order cap is " +
                                           std::to_string(kMaxMomentOrder));
  const int r = env.types();

  std::vector<long> sizes, offsets;
  long total = 0;
  for (int n = 1; n <= n_max; ++n) {
    long c = long(MultiIndexSet::build(n, r).size());
    if (y_init[std::size_t(n - 1)].size() != c)
      throw ValidationError("hierarchy", "initial block size mismatch at order " +
                                             std::to_string(n));
    sizes.push_back(c);
    offsets.push_back(total);
    total += c;
  }
  for (int n = 1; n <= n_max; ++n)
    if (normalization_residual(n, r, y_init[std::size_t(n - 1)]) > 1e-8)
      throw InconsistentInitialMoments(
          "initial moments violate the normalization identity at order " +
          std::to_string(n));

  std::vector<Eigen::MatrixXd> bn, dn;
  for (int n = 1; n <= n_max; ++n) {
    bn.push_back(build_Bn(n, r));
    dn.push_back(n >= 2 ? build_Dn(n, r) : Eigen::MatrixXd());
  }

  Eigen::VectorXd y(total);
  for (int n = 1; n <= n_max; ++n)
    y.segment(offsets[std::size_t(n - 1)], sizes[std::size_t(n - 1)]) =
        y_init[std::size_t(n - 1)];

  auto deriv = [&](double, const Eigen::MatrixXd& a,
                   const Eigen::VectorXd& state) -> Eigen::VectorXd {
    Eigen::VectorXd dy(total);
    for (int n = 1; n <= n_max; ++n) {
      auto block = state.segment(offsets[std::size_t(n - 1)],
                                 sizes[std::size_t(n - 1)]);
      Eigen::VectorXd d = build_An(a, n) * block +
                          bn[std::size_t(n - 1)] * block;
      if (n >= 2)
        d += dn[std::size_t(n - 1)] *
             state.segment(offsets[std::size_t(n - 2)],
                           sizes[std::size_t(n - 2)]);
      dy.segment(offsets[std::size_t(n - 1)], sizes[std::size_t(n - 1)]) = d;
    }
    return dy;
  };

  std::vector<double> grid{0.0};
  std::vector<Eigen::VectorXd> states{y};
  long long full = (long long)(std::floor(T / h + 1e-9));
  for (long long k = 1; k <= full; ++k) {
    y = rk4_env_advance(env, double(k - 1) * h, double(k) * h, h, y, deriv);
    grid.push_back(double(k) * h);
    states.push_back(y);
  }
  if (grid.back() < T - 1e-12) {
    y = rk4_env_advance(env, grid.back(), T, h, y, deriv);
    grid.push_back(T);
    states.push_back(y);
  }

  std::vector<MomentBlock> blocks;
  for (int n = 1; n <= n_max; ++n) {
    MomentBlock b;
    b.order = n;
    b.grid = grid;
    for (const auto& s : states)
      b.values.push_back(s.segment(offsets[std::size_t(n - 1)],
                                   sizes[std::size_t(n - 1)]));
    blocks.push_back(std::move(b));
  }
  return blocks;
}

std::vector<Eigen::VectorXd> volterra_solve(
    const std::function<Eigen::MatrixXd(double s, double t)>& kernel,
    const std::function<Eigen::VectorXd(double s)>& forcing, double T,
    double h) {
  if (h <= 0.0 || T <= 0.0)
    throw ValidationError("volterra", "need positive step and horizon");
  std::vector<double> nodes{0.0};
  long long full = (long long)(std::floor(T / h + 1e-9));
  for (long long k = 1; k <= full; ++k) nodes.push_back(double(k) * h);
  if (nodes.back() < T - 1e-12) nodes.push_back(T);
  const std::size_t m_total = nodes.size();

  std::vector<Eigen::VectorXd> x;
  x.reserve(m_total);
  x.push_back(forcing(0.0));
  const long dim = x[0].size();
  for (std::size_t m = 1; m < m_total; ++m) {
    double s = nodes[m];
    Eigen::VectorXd rhs = forcing(s);
    for (std::size_t j = 0; j < m; ++j) {
      double left = (j == 0) ? nodes[0] : nodes[j - 1];
      double w = 0.5 * (nodes[j + 1] - left);
      rhs += w * (kernel(s, nodes[j]) * x[j]);
    }
    double w_m = 0.5 * (nodes[m] - nodes[m - 1]);
    Eigen::MatrixXd lhs =
        Eigen::MatrixXd::Identity(dim, dim) - w_m * kernel(s, s);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
    if (!lu.isInvertible())
      throw SingularStep("I - w V(s,s) singular at s = " + std::to_string(s));
    x.push_back(lu.solve(rhs));
  }
  return x;
}

std::vector<MomentBlock> volterra_hierarchy_solve(
    const EnvPath& env, const std::vector<Eigen::VectorXd>& y_init, double T,
    double h) {
  const int n_max = int(y_init.size());
  if (n_max < 1) throw ValidationError("hierarchy", "need at least order 1");
  const int r = env.types();

  std::vector<double> nodes{0.0};
  long long full = (long long)(std::floor(T / h + 1e-9));
  for (long long k = 1; k <= full; ++k) nodes.push_back(double(k) * h);
  if (nodes.back() < T - 1e-12) nodes.push_back(T);

  std::vector<MomentBlock> blocks;
  std::vector<Eigen::VectorXd> prev;  // solved block n-1 on the node grid
  for (int n = 1; n <= n_max; ++n) {
    Eigen::MatrixXd bn = build_Bn(n, r);
    auto kernel = [&, n](double, double t) -> Eigen::MatrixXd {
      Eigen::MatrixXd an = build_An(env.evaluate(t).entries(), n);
      return n == 1 ? an : Eigen::MatrixXd(an + bn);
    };

    // forcing: y_n(0) plus the accumulated lower-order coupling
    std::vector<Eigen::VectorXd> fvals(nodes.size());
    fvals[0] = y_init[std::size_t(n - 1)];
    if (n == 1) {
      for (std::size_t k = 1; k < nodes.size(); ++k) fvals[k] = fvals[0];
    } else {
      Eigen::MatrixXd dmat = build_Dn(n, r);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(fvals[0].size());
      std::vector<Eigen::VectorXd> integrand;
      for (const auto& v : prev) integrand.push_back(dmat * v);
      for (std::size_t k = 1; k < nodes.size(); ++k) {
        acc += 0.5 * (nodes[k] - nodes[k - 1]) *
               (integrand[k - 1] + integrand[k]);
        fvals[k] = fvals[0] + acc;
      }
    }
    auto forcing = [&](double s) -> Eigen::VectorXd {
      for (std::size_t k = 0; k < nodes.size(); ++k)
        if (std::abs(nodes[k] - s) < 1e-9) return fvals[k];
      throw GridMismatch("forcing queried off-grid at " + std::to_string(s));
    };

    std::vector<Eigen::VectorXd> sol = volterra_solve(kernel, forcing, T, h);
    MomentBlock b;
    b.order = n;
    b.grid = nodes;
    b.values = sol;
    blocks.push_back(b);
    prev = std::move(sol);
  }
  return blocks;
}

}  // namespace typeflow
