#include "typeflow/rng.hpp"

#include <algorithm>

namespace typeflow {

namespace {

// Stirling series tail of log k!, used by the BTRS acceptance bound.
double stirling_tail(double k) {
  static const double table[10] = {
      0.0810614667953272,  0.0413406959554092,  0.0276779256849983,
      0.0207906721037651,  0.0166446911898211,  0.0138761288230707,
      0.0118967099458917,  0.0104112652619720,  0.00925546218271273,
      0.00833056343336287};
  if (k <= 9.0) return table[int(k)];
  double kp1sq = (k + 1.0) * (k + 1.0);
  return (1.0 / 12 - (1.0 / 360 - 1.0 / 1260 / kp1sq) / kp1sq) / (k + 1.0);
}

}  // namespace

long long Rng::binomial(long long n, double p) {
  if (n <= 0) return 0;
  if (p <= 0.0) return 0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);

  double np = double(n) * p;
  if (np < 10.0) {
    // Inverse-CDF sequential search. With p <= 1/2 and np < 10 the
    // starting mass (1-p)^n stays far above the underflow floor.
    double q = std::exp(double(n) * std::log1p(-p));
    double u = uniform01();
    double pdf = q;
    double cdf = pdf;
    double s = p / (1.0 - p);
    long long k = 0;
    while (u > cdf && k < n) {
      pdf *= s * double(n - k) / double(k + 1);
      ++k;
      cdf += pdf;
    }
    return k;
  }

  // BTRS transformed rejection (Hormann), valid for p <= 1/2, np >= 10.
  double q = 1.0 - p;
  double spq = std::sqrt(np * q);
  double b = 1.15 + 2.53 * spq;
  double a = -0.0873 + 0.0248 * b + 0.01 * p;
  double c = np + 0.5;
  double v_r = 0.92 - 4.2 / b;
  double r = p / q;
  double alpha = (2.83 + 5.1 / b) * spq;
  double m = std::floor((double(n) + 1.0) * p);
  for (;;) {
    double u = uniform01() - 0.5;
    double v = uniform01();
    double us = 0.5 - std::abs(u);
    double kf = std::floor((2.0 * a / us + b) * u + c);
    if (kf < 0.0 || kf > double(n)) continue;
    if (us >= 0.07 && v <= v_r) return (long long)(kf);
    v = std::log(v * alpha / (a / (us * us) + b));
    double upper =
        (m + 0.5) * std::log((m + 1.0) / (r * (double(n) - m + 1.0))) +
        (double(n) + 1.0) *
            std::log((double(n) - m + 1.0) / (double(n) - kf + 1.0)) +
        (kf + 0.5) * std::log(r * (double(n) - kf + 1.0) / (kf + 1.0)) +
        stirling_tail(m) + stirling_tail(double(n) - m) - stirling_tail(kf) -
        stirling_tail(double(n) - kf);
    if (v <= upper) return (long long)(kf);
  }
}

Eigen::Matrix<long long, Eigen::Dynamic, 1> Rng::multinomial(
    long long n, const Eigen::VectorXd& probs) {
  const int r = int(probs.size());
  Eigen::Matrix<long long, Eigen::Dynamic, 1> out =
      Eigen::Matrix<long long, Eigen::Dynamic, 1>::Zero(r);
  long long remaining = n;
  double mass = 1.0;
  for (int j = 0; j + 1 < r && remaining > 0; ++j) {
    double pj = probs[j];
    double ratio = mass > 0.0 ? std::clamp(pj / mass, 0.0, 1.0) : 1.0;
    long long draw = binomial(remaining, ratio);
    out[j] = draw;
    remaining -= draw;
    mass -= pj;
  }
  if (r > 0) out[r - 1] += remaining;
  return out;
}

double Rng::gamma(double shape) {
  if (shape < 1.0) {
    double u = uniform01();
    // Boost from shape+1; u^(1/shape) can underflow harmlessly to 0.
    return gamma(shape + 1.0) * std::pow(1.0 - u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = uniform01();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

Eigen::VectorXd Rng::dirichlet(const Eigen::VectorXd& alpha) {
  Eigen::VectorXd g(alpha.size());
  for (int i = 0; i < alpha.size(); ++i) g[i] = gamma(alpha[i]);
  double s = g.sum();
  if (s <= 0.0) {
    // All gammas underflowed; fall back to the largest-alpha vertex.
    int imax = 0;
    alpha.maxCoeff(&imax);
    g.setZero();
    g[imax] = 1.0;
    return g;
  }
  return g / s;
}

int Rng::discrete(const Eigen::VectorXd& weights) {
  double total = weights.sum();
  double u = uniform01() * total;
  double acc = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return int(weights.size()) - 1;
}

}  // namespace typeflow
