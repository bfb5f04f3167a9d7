#include "typeflow/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace typeflow {

namespace {

Eigen::MatrixXd sinusoid_matrix(const SinusoidRates& s, double t) {
  const int r = int(s.base.rows());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(r, r);
  double osc = std::sin(s.omega * t + s.phase);
  for (int i = 0; i < r; ++i) {
    double row = 0.0;
    for (int j = 0; j < r; ++j) {
      if (i == j) continue;
      m(i, j) = s.base(i, j) + s.amplitude(i, j) * osc;
      row += m(i, j);
    }
    m(i, i) = -row;
  }
  return m;
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

}  // namespace

EnvPath EnvPath::constant(RateMatrix a) {
  EnvPath env;
  env.kind_ = EnvKind::Constant;
  env.r_ = a.types();
  env.horizon_ = std::numeric_limits<double>::infinity();
  env.values_.push_back(a.entries());
  return env;
}

EnvPath EnvPath::piecewise(std::vector<double> breakpoints,
                           std::vector<RateMatrix> values, double horizon) {
  if (values.empty())
    throw ValidationError("environment", "piecewise path needs >= 1 plateau");
  if (breakpoints.size() + 1 != values.size())
    throw ValidationError("environment",
                          "need one more plateau than interior breakpoints");
  for (std::size_t k = 0; k < breakpoints.size(); ++k) {
    if (breakpoints[k] <= 0.0 ||
        (k > 0 && breakpoints[k] <= breakpoints[k - 1]))
      throw ValidationError("environment",
                            "breakpoints must be strictly increasing and > 0");
  }
  EnvPath env;
  env.kind_ = EnvKind::PiecewiseConstant;
  env.r_ = values.front().types();
  for (const auto& v : values)
    if (v.types() != env.r_)
      throw ValidationError("environment", "plateau dimension mismatch");
  env.horizon_ = horizon;
  env.breaks_ = std::move(breakpoints);
  for (auto& v : values) env.values_.push_back(v.entries());
  return env;
}

EnvPath EnvPath::sinusoid(SinusoidRates spec) {
  const int r = int(spec.base.rows());
  if (spec.base.rows() != spec.base.cols() ||
      spec.amplitude.rows() != spec.amplitude.cols() ||
      spec.amplitude.rows() != spec.base.rows() || r < 2)
    throw ValidationError("environment", "sinusoid matrices must be r x r");
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (i != j && spec.base(i, j) < std::abs(spec.amplitude(i, j)))
        throw ValidationError(
            "environment",
            "sinusoid base must dominate |amplitude| off the diagonal");
  EnvPath env;
  env.kind_ = EnvKind::ParametricSmooth;
  env.r_ = r;
  env.horizon_ = std::numeric_limits<double>::infinity();
  env.sin_ = std::move(spec);
  return env;
}

RateMatrix EnvPath::evaluate(double t) const {
  if (t < 0.0 || t > horizon_) throw OutOfHorizon(t, horizon_);
  switch (kind_) {
    case EnvKind::Constant:
      return validate_rate_matrix(values_[0]);
    case EnvKind::PiecewiseConstant: {
      auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
      return validate_rate_matrix(values_[it - breaks_.begin()]);
    }
    case EnvKind::ParametricSmooth:
      return validate_rate_matrix(sinusoid_matrix(sin_, t));
  }
  throw Error("unreachable");
}

double EnvPath::min_population() const {
  if (kind_ == EnvKind::ParametricSmooth) {
    const int r = r_;
    double worst = 0.0;
    for (int i = 0; i < r; ++i) {
      double row = 0.0;
      for (int j = 0; j < r; ++j)
        if (i != j) row += sin_.base(i, j) + std::abs(sin_.amplitude(i, j));
      worst = std::max(worst, row);
    }
    return worst;
  }
  double worst = 0.0;
  for (const auto& v : values_)
    worst = std::max(worst, -v.diagonal().minCoeff());
  return worst;
}

MatrixPathView EnvPath::path_view() const {
  MatrixPathView view;
  view.horizon = horizon_;
  view.breakpoints = breaks_;
  view.value = [env = *this](double t) { return env.evaluate(t).entries(); };
  return view;
}

StepEnvPath::StepEnvPath(long long density, std::vector<RateMatrix> values,
                         double horizon)
    : n_(density), horizon_(horizon), values_(std::move(values)) {
  if (n_ < 1) throw ValidationError("step_env", "density must be >= 1");
  if (values_.empty()) throw ValidationError("step_env", "no step values");
  const int r = values_.front().types();
  for (const auto& v : values_)
    if (v.types() != r)
      throw ValidationError("step_env", "step dimension mismatch");
  double covered = double(values_.size() - 1) / double(n_);
  if (covered + 1.0 / double(n_) <= horizon_ - 1e-12)
    throw ValidationError("step_env", "step values do not cover the horizon");
}

const RateMatrix& StepEnvPath::value_at_step(long long k) const {
  if (k < 0) throw OutOfHorizon(double(k) / double(n_), horizon_);
  if (k >= steps()) {
    if (double(k) / double(n_) > horizon_)
      throw OutOfHorizon(double(k) / double(n_), horizon_);
    return values_.back();
  }
  return values_[std::size_t(k)];
}

RateMatrix StepEnvPath::evaluate(double t) const {
  if (t < 0.0 || t > horizon_) throw OutOfHorizon(t, horizon_);
  long long k = (long long)(std::floor(t * double(n_)));
  k = std::min(k, steps() - 1);
  return values_[std::size_t(k)];
}

double StepEnvPath::min_population() const {
  double worst = 0.0;
  for (const auto& v : values_) worst = std::max(worst, v.min_population());
  return worst;
}

EnvPath StepEnvPath::as_env_path() const {
  std::vector<double> breaks;
  breaks.reserve(values_.size() - 1);
  for (std::size_t k = 1; k < values_.size(); ++k)
    breaks.push_back(double(k) / double(n_));
  return EnvPath::piecewise(std::move(breaks), values_, horizon_);
}

MatrixPathView StepEnvPath::path_view() const {
  MatrixPathView view;
  view.horizon = horizon_;
  view.breakpoints.reserve(values_.size() - 1);
  for (std::size_t k = 1; k < values_.size(); ++k)
    view.breakpoints.push_back(double(k) / double(n_));
  view.value = [env = *this](double t) { return env.evaluate(t).entries(); };
  return view;
}

StepEnvPath discretize(const EnvPath& env, long long n) {
  if (!std::isfinite(env.horizon()))
    throw ValidationError("discretize",
                          "unbounded environment needs an explicit horizon");
  return discretize(env, n, env.horizon());
}

StepEnvPath discretize(const EnvPath& env, long long n, double horizon) {
  if (n < 1) throw ValidationError("discretize", "density must be >= 1");
  if (horizon <= 0.0 || horizon > env.horizon())
    throw OutOfHorizon(horizon, env.horizon());
  long long last = (long long)(std::floor(horizon * double(n) + 1e-9));
  std::vector<RateMatrix> values;
  values.reserve(std::size_t(last) + 1);
  for (long long k = 0; k <= last; ++k)
    values.push_back(env.evaluate(double(k) / double(n)));
  return StepEnvPath(n, std::move(values), horizon);
}

RateMatrix fundamentals_map(double h_value, const Eigen::MatrixXd& offsets,
                            const Eigen::MatrixXd& weights) {
  const int r = int(offsets.rows());
  if (offsets.rows() != offsets.cols() || weights.rows() != weights.cols() ||
      weights.rows() != offsets.rows() || r < 2)
    throw ValidationError("fundamentals", "offset/weight matrices must be r x r");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    double row = 0.0;
    for (int j = 0; j < r; ++j) {
      if (i == j) continue;
      m(i, j) = softplus(offsets(i, j) + weights(i, j) * h_value);
      row += m(i, j);
    }
    m(i, i) = -row;
  }
  return validate_rate_matrix(m);
}

void MarkovSwitchSpec::validate() const {
  if (states.empty())
    throw ValidationError("markov_switch", "need at least one state matrix");
  const int r = states.front().types();
  for (const auto& s : states)
    if (s.types() != r)
      throw ValidationError("markov_switch", "state dimension mismatch");
  const int m = int(states.size());
  if (intensity.rows() != m || intensity.cols() != m)
    throw ValidationError("markov_switch",
                          "intensity matrix must be #states x #states");
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j) {
      if (i != j && intensity(i, j) < 0.0)
        throw ValidationError("markov_switch", "negative switching intensity");
      row += intensity(i, j);
    }
    if (std::abs(row) > kRowSumTol)
      throw ValidationError("markov_switch", "intensity rows must sum to 0");
  }
  if (initial_law.size() != m)
    throw ValidationError("markov_switch", "initial law length mismatch");
  if (initial_law.minCoeff() < 0.0 ||
      std::abs(initial_law.sum() - 1.0) > kSimplexSumTol)
    throw ValidationError("markov_switch",
                          "initial law must be a probability vector");
}

void Ar1FundamentalsSpec::validate() const {
  if (std::abs(phi) >= 1.0)
    throw ValidationError("ar1_fundamentals", "|phi| must be < 1");
  if (sigma < 0.0)
    throw ValidationError("ar1_fundamentals", "sigma must be >= 0");
  if (density < 1)
    throw ValidationError("ar1_fundamentals", "density must be >= 1");
  fundamentals_map(h0, offsets, weights);  // shape check
}

void RandomEnvSpec::validate() const {
  std::visit([](const auto& s) { s.validate(); }, law);
}

int RandomEnvSpec::types() const {
  if (const auto* m = std::get_if<MarkovSwitchSpec>(&law))
    return m->states.front().types();
  return int(std::get<Ar1FundamentalsSpec>(law).offsets.rows());
}

double RandomEnvSpec::min_population_bound() const {
  if (const auto* m = std::get_if<MarkovSwitchSpec>(&law)) {
    double worst = 0.0;
    for (const auto& s : m->states)
      worst = std::max(worst, s.min_population());
    return worst;
  }
  const auto& f = std::get<Ar1FundamentalsSpec>(law);
  double spread = std::abs(f.h0) +
                  8.0 * f.sigma / std::sqrt(1.0 - f.phi * f.phi);
  const int r = int(f.offsets.rows());
  double worst = 0.0;
  for (int i = 0; i < r; ++i) {
    double row = 0.0;
    for (int j = 0; j < r; ++j) {
      if (i == j) continue;
      row += softplus(f.offsets(i, j) + std::abs(f.weights(i, j)) * spread);
    }
    worst = std::max(worst, row);
  }
  return worst;
}

EnvPath sample_env(const RandomEnvSpec& spec, double horizon, Rng& rng) {
  if (horizon <= 0.0)
    throw ValidationError("sample_env", "horizon must be positive");
  spec.validate();

  if (const auto* ms = std::get_if<MarkovSwitchSpec>(&spec.law)) {
    int state = rng.discrete(ms->initial_law);
    std::vector<double> breaks;
    std::vector<RateMatrix> plateaus{ms->states[std::size_t(state)]};
    double t = 0.0;
    for (;;) {
      double rate = -ms->intensity(state, state);
      if (rate <= 0.0) break;
      t += rng.exponential(rate);
      if (t >= horizon) break;
      Eigen::VectorXd w = ms->intensity.row(state).transpose().cwiseMax(0.0);
      w[state] = 0.0;
      state = rng.discrete(w);
      breaks.push_back(t);
      plateaus.push_back(ms->states[std::size_t(state)]);
    }
    return EnvPath::piecewise(std::move(breaks), std::move(plateaus), horizon);
  }

  const auto& f = std::get<Ar1FundamentalsSpec>(spec.law);
  long long last = (long long)(std::floor(horizon * double(f.density) + 1e-9));
  std::vector<double> breaks;
  std::vector<RateMatrix> plateaus;
  plateaus.reserve(std::size_t(last) + 1);
  double h = f.h0;
  for (long long k = 0; k <= last; ++k) {
    plateaus.push_back(fundamentals_map(h, f.offsets, f.weights));
    if (k < last) breaks.push_back(double(k + 1) / double(f.density));
    h = f.phi * h + f.sigma * rng.normal();
  }
  return EnvPath::piecewise(std::move(breaks), std::move(plateaus), horizon);
}

}  // namespace typeflow
