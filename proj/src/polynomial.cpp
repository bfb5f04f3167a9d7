#include "typeflow/polynomial.hpp"

#include <cmath>
#include <numeric>

namespace typeflow {

PolynomialTestFn::PolynomialTestFn(int r, const std::vector<Term>& terms)
    : r_(r), degree_(0) {
  if (r < 2) throw ValidationError("polynomial", "need at least 2 variables");
  std::map<std::vector<int>, double> canon;
  for (const auto& [alpha, c] : terms) {
    if (int(alpha.size()) != r)
      throw ValidationError("polynomial", "exponent vector length mismatch");
    int deg = 0;
    for (int e : alpha) {
      if (e < 0)
        throw ValidationError("polynomial", "negative exponent");
      deg += e;
    }
    if (deg > kMaxDegree) throw DegreeTooHigh(deg);
    canon[alpha] += c;
  }
  for (auto& [alpha, c] : canon) {
    if (c == 0.0) continue;
    int deg = std::accumulate(alpha.begin(), alpha.end(), 0);
    degree_ = std::max(degree_, deg);
    terms_.emplace_back(alpha, c);
  }
}

PolynomialTestFn PolynomialTestFn::monomial(int r, std::vector<int> alpha,
                                            double coeff) {
  return PolynomialTestFn(r, {{std::move(alpha), coeff}});
}

PolynomialTestFn PolynomialTestFn::constant(int r, double c) {
  return PolynomialTestFn(r, {{std::vector<int>(r, 0), c}});
}

PolynomialTestFn PolynomialTestFn::coordinate(int r, int i, double coeff) {
  std::vector<int> alpha(r, 0);
  alpha[i] = 1;
  return PolynomialTestFn(r, {{std::move(alpha), coeff}});
}

namespace {
double ipow(double x, int e) {
  double out = 1.0;
  for (int k = 0; k < e; ++k) out *= x;
  return out;
}
}  // namespace

double PolynomialTestFn::operator()(const Eigen::VectorXd& x) const {
  double out = 0.0;
  for (const auto& [alpha, c] : terms_) {
    double t = c;
    for (int i = 0; i < r_; ++i) t *= ipow(x[i], alpha[i]);
    out += t;
  }
  return out;
}

Eigen::VectorXd PolynomialTestFn::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(r_);
  for (const auto& [alpha, c] : terms_) {
    for (int i = 0; i < r_; ++i) {
      if (alpha[i] == 0) continue;
      double t = c * alpha[i] * ipow(x[i], alpha[i] - 1);
      for (int j = 0; j < r_; ++j)
        if (j != i) t *= ipow(x[j], alpha[j]);
      g[i] += t;
    }
  }
  return g;
}

Eigen::MatrixXd PolynomialTestFn::hessian(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(r_, r_);
  for (const auto& [alpha, c] : terms_) {
    for (int i = 0; i < r_; ++i) {
      if (alpha[i] == 0) continue;
      // diagonal
      if (alpha[i] >= 2) {
        double t = c * alpha[i] * (alpha[i] - 1) * ipow(x[i], alpha[i] - 2);
        for (int j = 0; j < r_; ++j)
          if (j != i) t *= ipow(x[j], alpha[j]);
        h(i, i) += t;
      }
      // mixed
      for (int j = i + 1; j < r_; ++j) {
        if (alpha[j] == 0) continue;
        double t = c * alpha[i] * alpha[j] * ipow(x[i], alpha[i] - 1) *
                   ipow(x[j], alpha[j] - 1);
        for (int l = 0; l < r_; ++l)
          if (l != i && l != j) t *= ipow(x[l], alpha[l]);
        h(i, j) += t;
        h(j, i) += t;
      }
    }
  }
  return h;
}

}  // namespace typeflow
