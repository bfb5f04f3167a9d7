#pragma once

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "typeflow/errors.hpp"

namespace typeflow {

/// Multivariate polynomial test function on the simplex, total degree <= 4.
/// Terms are (exponent multi-index, coefficient) pairs; duplicate monomials
/// are merged at construction.
class PolynomialTestFn {
 public:
  static constexpr int kMaxDegree = 4;

  using Term = std::pair<std::vector<int>, double>;

  PolynomialTestFn(int r, const std::vector<Term>& terms);

  static PolynomialTestFn monomial(int r, std::vector<int> alpha,
                                   double coeff = 1.0);
  static PolynomialTestFn constant(int r, double c);
  /// coeff * x_i
  static PolynomialTestFn coordinate(int r, int i, double coeff = 1.0);

  int dim() const { return r_; }
  int degree() const { return degree_; }
  const std::vector<Term>& terms() const { return terms_; }

  double operator()(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

 private:
  int r_;
  int degree_;
  std::vector<Term> terms_;
};

}  // namespace typeflow
