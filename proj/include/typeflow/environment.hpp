#pragma once

#include <variant>
#include <vector>

#include "typeflow/rng.hpp"
#include "typeflow/simplex_core.hpp"

namespace typeflow {

enum class EnvKind { Constant, PiecewiseConstant, ParametricSmooth };

/// Named smooth rate family: off-diagonal rates
///   a_ij(t) = base_ij + amplitude_ij * sin(omega t + phase),
/// diagonal recomputed as the negative row sum. Requires
/// base_ij >= |amplitude_ij| off the diagonal so rates stay nonnegative.
struct SinusoidRates {
  Eigen::MatrixXd base;
  Eigen::MatrixXd amplitude;
  double omega = 1.0;
  double phase = 0.0;
};

/// The environment path A(t): a Q-matrix valued function on [0, horizon].
class EnvPath {
 public:
  static EnvPath constant(RateMatrix a);
  static EnvPath piecewise(std::vector<double> breakpoints,
                           std::vector<RateMatrix> values, double horizon);
  static EnvPath sinusoid(SinusoidRates spec);

  EnvKind kind() const { return kind_; }
  int types() const { return r_; }
  double horizon() const { return horizon_; }
  /// Jump times (empty for constant and smooth paths), excluding t = 0.
  const std::vector<double>& breakpoints() const { return breaks_; }

  /// A(t); right-continuous lookup for piecewise paths.
  RateMatrix evaluate(double t) const;

  /// Upper bound on max_i |a_ii(t)| over the whole path; the smallest
  /// admissible population size. Exact for constant/piecewise paths.
  double min_population() const;

  MatrixPathView path_view() const;

 private:
  EnvPath() = default;
  EnvKind kind_ = EnvKind::Constant;
  int r_ = 0;
  double horizon_ = 0.0;
  std::vector<double> breaks_;         // piecewise: plateau start times > 0
  std::vector<Eigen::MatrixXd> values_;  // constant: 1, piecewise: breaks+1
  SinusoidRates sin_;
};

/// A(t) held constant on [k/N, (k+1)/N): the step environment a chain of
/// population N actually sees.
class StepEnvPath {
 public:
  StepEnvPath(long long density, std::vector<RateMatrix> values,
              double horizon);

  long long density() const { return n_; }
  double horizon() const { return horizon_; }
  int types() const { return values_.front().types(); }
  long long steps() const { return (long long)(values_.size()); }

  const RateMatrix& value_at_step(long long k) const;
  RateMatrix evaluate(double t) const;
  double min_population() const;

  EnvPath as_env_path() const;
  MatrixPathView path_view() const;

 private:
  long long n_;
  double horizon_;
  std::vector<RateMatrix> values_;
};

/// Sample A at the step grid {k/N}: value at step k is A(k/N).
StepEnvPath discretize(const EnvPath& env, long long n);
StepEnvPath discretize(const EnvPath& env, long long n, double horizon);

/// Off-diagonal rates softplus(c_ij + w_ij * h), diagonal the negative row
/// sum; a continuous map from a scalar fundamentals value to a Q-matrix.
RateMatrix fundamentals_map(double h_value, const Eigen::MatrixXd& offsets,
                            const Eigen::MatrixXd& weights);

/// Markov-modulated environment: the path switches between a finite set of
/// Q-matrices at the jump times of a continuous-time chain over states.
struct MarkovSwitchSpec {
  std::vector<RateMatrix> states;
  Eigen::MatrixXd intensity;    // Q-matrix over states (size may be 1)
  Eigen::VectorXd initial_law;  // probability vector over states

  void validate() const;
};

/// AR(1) fundamentals h_{k+1} = phi h_k + sigma eps_k held constant on
/// [k/density, (k+1)/density) and mapped through fundamentals_map.
struct Ar1FundamentalsSpec {
  double phi = 0.9;
  double sigma = 0.1;
  double h0 = 0.0;
  long long density = 16;
  Eigen::MatrixXd offsets;
  Eigen::MatrixXd weights;

  void validate() const;
};

struct RandomEnvSpec {
  std::variant<MarkovSwitchSpec, Ar1FundamentalsSpec> law;

  void validate() const;
  int types() const;
  /// High-probability admissibility bound (exact for markov_switch; an
  /// 8-sigma stationary bound for fundamentals).
  double min_population_bound() const;
};

/// Draw one environment path on [0, horizon]. Reproducible given the rng.
EnvPath sample_env(const RandomEnvSpec& spec, double horizon, Rng& rng);

}  // namespace typeflow
