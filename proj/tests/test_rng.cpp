#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "typeflow/rng.hpp"

using namespace typeflow;

namespace {

double binomial_pmf(long long n, double p, long long k) {
  double lg = std::lgamma(double(n + 1)) - std::lgamma(double(k + 1)) -
              std::lgamma(double(n - k + 1));
  return std::exp(lg + double(k) * std::log(p) +
                  double(n - k) * std::log1p(-p));
}

// chi-square against the exact pmf, bins merged to expected >= 10
void check_binomial_dist(long long n, double p, int draws,
                         std::uint64_t seed) {
  Rng rng(seed, 7);
  std::map<long long, int> hist;
  for (int i = 0; i < draws; ++i) ++hist[rng.binomial(n, p)];

  std::vector<double> expected;
  std::vector<double> observed;
  double acc_e = 0.0, acc_o = 0.0;
  for (long long k = 0; k <= n; ++k) {
    acc_e += binomial_pmf(n, p, k) * draws;
    auto it = hist.find(k);
    acc_o += it == hist.end() ? 0.0 : double(it->second);
    if (acc_e >= 10.0) {
      expected.push_back(acc_e);
      observed.push_back(acc_o);
      acc_e = acc_o = 0.0;
    }
  }
  if (acc_e > 0.0 && !expected.empty()) {
    expected.back() += acc_e;
    observed.back() += acc_o;
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    double d = observed[i] - expected[i];
    chi2 += d * d / expected[i];
  }
  double dof = double(expected.size()) - 1.0;
  // 5-sigma-ish band on a chi-square variate
  CHECK(chi2 < dof + 5.0 * std::sqrt(2.0 * dof) + 5.0);
}

}  // namespace

TEST_SUITE("rng") {
  TEST_CASE("same seed and stream reproduce; streams differ") {
    Rng a(42, 1), b(42, 1), c(42, 2);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
      auto va = a(), vb = b(), vc = c();
      all_equal = all_equal && (va == vb);
      any_diff = any_diff || (va != vc);
    }
    CHECK(all_equal);
    CHECK(any_diff);
  }

  TEST_CASE("uniform01 range and mean") {
    Rng rng(1, 0);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
      double u = rng.uniform01();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    CHECK(std::abs(sum / 100000.0 - 0.5) < 4.0 * 0.2887 / std::sqrt(100000.0));
  }

  TEST_CASE("normal moments") {
    Rng rng(2, 0);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double z = rng.normal();
      sum += z;
      sum2 += z * z;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / double(n)));
  }

  TEST_CASE("binomial edge cases") {
    Rng rng(3, 0);
    CHECK(rng.binomial(10, 0.0) == 0);
    CHECK(rng.binomial(10, 1.0) == 10);
    CHECK(rng.binomial(0, 0.5) == 0);
    for (int i = 0; i < 100; ++i) {
      long long k = rng.binomial(5, 0.5);
      REQUIRE(k >= 0);
      REQUIRE(k <= 5);
    }
  }

  TEST_CASE("binomial matches the exact law (inverse-CDF branch)") {
    check_binomial_dist(25, 0.3, 200000, 11);
  }

  TEST_CASE("binomial matches the exact law (BTRS branch)") {
    check_binomial_dist(100, 0.3, 200000, 12);
    check_binomial_dist(400, 0.49, 200000, 13);
  }

  TEST_CASE("binomial high-p flip") {
    Rng rng(4, 0);
    const int n = 50000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += double(rng.binomial(60, 0.7));
    double mean = sum / n;
    double sd = std::sqrt(60 * 0.7 * 0.3);
    CHECK(std::abs(mean - 42.0) < 4.0 * sd / std::sqrt(double(n)));
  }

  TEST_CASE("multinomial conserves the total and the mean") {
    Rng rng(5, 0);
    Eigen::VectorXd p(3);
    p << 0.2, 0.5, 0.3;
    const int n = 20000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < n; ++i) {
      auto draw = rng.multinomial(50, p);
      REQUIRE(draw.sum() == 50);
      mean += draw.cast<double>();
    }
    mean /= double(n);
    for (int j = 0; j < 3; ++j) {
      double sd = std::sqrt(50 * p[j] * (1 - p[j]));
      CHECK(std::abs(mean[j] - 50 * p[j]) < 4.0 * sd / std::sqrt(double(n)));
    }
  }

  TEST_CASE("dirichlet is a simplex point with the right mean") {
    Rng rng(6, 0);
    Eigen::VectorXd alpha(3);
    alpha << 2.0, 1.0, 3.0;
    const int n = 20000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd x = rng.dirichlet(alpha);
      REQUIRE(std::abs(x.sum() - 1.0) < 1e-12);
      REQUIRE(x.minCoeff() >= 0.0);
      mean += x;
    }
    mean /= double(n);
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(mean[j] - alpha[j] / 6.0) < 0.01);
  }

  TEST_CASE("exponential mean") {
    Rng rng(7, 0);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng.exponential(2.0);
    CHECK(std::abs(sum / n - 0.5) < 4.0 * 0.5 / std::sqrt(double(n)));
  }
}
