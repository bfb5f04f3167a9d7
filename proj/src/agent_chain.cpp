#include "typeflow/agent_chain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace typeflow {

void ChainConfig::validate() const {
  if (horizon <= 0.0)
    throw ValidationError("chain", "horizon must be positive");
  if (env.horizon() + 1e-12 < horizon)
    throw ValidationError("chain", "environment shorter than the run horizon");
  if (initial.population() != population)
    throw ValidationError("chain", "initial counts population mismatch");
  if (initial.types() != env.types())
    throw ValidationError("chain", "initial counts dimension mismatch");
  if (env.density() != population)
    throw ValidationError("chain",
                          "environment step density must equal population");
  double n_min = env.min_population();
  if (double(population) < n_min)
    throw PopulationTooSmall(population, n_min);
}

TypeCounts internal_step(const TypeCounts& counts, const StochasticMatrix& p,
                         Rng& rng) {
  const int r = counts.types();
  VecI next = VecI::Zero(r);
  for (int i = 0; i < r; ++i) {
    if (counts[i] == 0) continue;
    Eigen::VectorXd row = p.row(i).transpose();
    next += rng.multinomial(counts[i], row);
  }
  return TypeCounts(next, counts.population());
}

TypeCounts multinomial_resample(const TypeCounts& counts, Rng& rng) {
  Eigen::VectorXd probs =
      counts.counts().cast<double>() / double(counts.population());
  return TypeCounts(rng.multinomial(counts.population(), probs),
                    counts.population());
}

ChainState step(const ChainState& state, const ChainConfig& cfg, Rng& rng) {
  long long total_steps =
      (long long)(std::ceil(double(cfg.population) * cfg.horizon - 1e-9));
  if (state.step_index >= total_steps)
    throw HorizonExceeded("chain already at step " +
                          std::to_string(state.step_index));
  StochasticMatrix p = internal_transition_matrix(
      cfg.env.value_at_step(state.step_index), cfg.population);
  TypeCounts counts = internal_step(state.counts, p, rng);
  if (cfg.model == Model::Mamwidams)
    counts = multinomial_resample(counts, rng);
  return ChainState{state.step_index + 1, counts};
}

std::vector<StochasticMatrix> transition_sequence(const ChainConfig& cfg) {
  cfg.validate();
  long long total_steps =
      (long long)(std::ceil(double(cfg.population) * cfg.horizon - 1e-9));
  std::vector<StochasticMatrix> seq;
  seq.reserve(std::size_t(total_steps));
  for (long long k = 0; k < total_steps; ++k)
    seq.push_back(
        internal_transition_matrix(cfg.env.value_at_step(k), cfg.population));
  return seq;
}

SimplexPath simulate(const ChainConfig& cfg, Rng& rng) {
  auto seq = transition_sequence(cfg);
  return simulate(cfg, seq, rng);
}

SimplexPath simulate(const ChainConfig& cfg,
                     std::span<const StochasticMatrix> p_seq, Rng& rng) {
  const long long n = cfg.population;
  std::vector<double> grid;
  std::vector<SimplexPoint> points;
  grid.reserve(p_seq.size() + 1);
  points.reserve(p_seq.size() + 1);
  TypeCounts counts = cfg.initial;
  grid.push_back(0.0);
  points.push_back(counts_to_point(counts));
  for (std::size_t k = 0; k < p_seq.size(); ++k) {
    counts = internal_step(counts, p_seq[k], rng);
    if (cfg.model == Model::Mamwidams)
      counts = multinomial_resample(counts, rng);
    grid.push_back(double(k + 1) / double(n));
    points.push_back(counts_to_point(counts));
  }
  return SimplexPath(std::move(grid), std::move(points),
                     Interp::PiecewiseConstant);
}

namespace {

Eigen::MatrixXd product_range(std::span<const StochasticMatrix> seq,
                              std::size_t first, std::size_t last_excl) {
  const int r = seq.empty() ? 0 : seq[0].types();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(r, r);
  for (std::size_t l = first; l < last_excl && l < seq.size(); ++l)
    m = m * seq[l].entries();
  return m;
}

}  // namespace

double pgf_eval(const Eigen::VectorXd& v, const TypeCounts& counts_m,
                std::span<const StochasticMatrix> p_seq) {
  if (p_seq.empty()) throw ValidationError("pgf", "empty transition sequence");
  if (v.minCoeff() <= 0.0)
    throw ValidationError("pgf", "v must be componentwise positive");
  Eigen::VectorXd u = v;
  for (std::size_t l = p_seq.size(); l-- > 1;) u = p_seq[l].entries() * u;
  double out = 1.0;
  for (int i = 0; i < counts_m.types(); ++i) {
    double base = p_seq[0].row(i).dot(u);
    out *= std::pow(base, double(counts_m[i]));
  }
  return out;
}

Eigen::VectorXd exact_conditional_mean(
    const TypeCounts& counts_m, std::span<const StochasticMatrix> p_seq) {
  if (p_seq.empty())
    throw ValidationError("conditional_mean", "empty transition sequence");
  Eigen::RowVectorXd row = counts_m.counts().cast<double>().transpose();
  for (const auto& p : p_seq) row = row * p.entries();
  return row.transpose();
}

double exact_conditional_sqdiff(const TypeCounts& counts_m,
                                std::span<const StochasticMatrix> p_seq,
                                int j) {
  if (p_seq.empty())
    throw ValidationError("conditional_sqdiff", "empty transition sequence");
  // q_i = (P_m ... P_{m+k-1})_{ij}: the chance a type-i agent sits in j
  // after the k steps. The closed form is
  //   mean^2 + mean - sum_i n_i q_i^2 - 2 mean n_j + n_j^2.
  Eigen::MatrixXd full = product_range(p_seq, 0, p_seq.size());
  Eigen::VectorXd q = full.col(j);
  double mean_j = counts_m.counts().cast<double>().dot(q);
  double s = 0.0;
  for (int i = 0; i < counts_m.types(); ++i)
    s += q[i] * q[i] * double(counts_m[i]);
  double nj = double(counts_m[j]);
  return mean_j * mean_j + mean_j - s - 2.0 * mean_j * nj + nj * nj;
}

// --- enumeration oracles -------------------------------------------------

namespace {

void check_enum_caps(const TypeCounts& counts) {
  if (counts.population() > kEnumMaxPopulation ||
      counts.types() > kEnumMaxTypes)
    throw EnumerationTooLarge(
        "enumeration limited to N <= " + std::to_string(kEnumMaxPopulation) +
        ", r <= " + std::to_string(kEnumMaxTypes));
}

void compositions(long long total, int parts, std::vector<long long>& cur,
                  const std::function<void(const std::vector<long long>&)>& emit) {
  if (parts == 1) {
    cur.push_back(total);
    emit(cur);
    cur.pop_back();
    return;
  }
  for (long long head = 0; head <= total; ++head) {
    cur.push_back(head);
    compositions(total - head, parts - 1, cur, emit);
    cur.pop_back();
  }
}

double factorial(long long n) {
  double out = 1.0;
  for (long long k = 2; k <= n; ++k) out *= double(k);
  return out;
}

double multinomial_pmf(const std::vector<long long>& outcome,
                       const Eigen::RowVectorXd& probs) {
  long long n = 0;
  for (long long c : outcome) n += c;
  double pmf = factorial(n);
  for (std::size_t j = 0; j < outcome.size(); ++j) {
    pmf /= factorial(outcome[j]);
    pmf *= std::pow(probs[int(j)], double(outcome[j]));
  }
  return pmf;
}

}  // namespace

CountsDist enumerate_internal_kernel(const TypeCounts& counts,
                                     const StochasticMatrix& p) {
  check_enum_caps(counts);
  const int r = counts.types();
  CountsDist dist{{std::vector<long long>(std::size_t(r), 0), 1.0}};
  std::vector<long long> scratch;
  for (int i = 0; i < r; ++i) {
    if (counts[i] == 0) continue;
    CountsDist next;
    Eigen::RowVectorXd row = p.row(i);
    compositions(counts[i], r, scratch,
                 [&](const std::vector<long long>& block) {
                   double pmf = multinomial_pmf(block, row);
                   if (pmf == 0.0) return;
                   for (const auto& [base, q] : dist) {
                     std::vector<long long> merged = base;
                     for (int j = 0; j < r; ++j)
                       merged[std::size_t(j)] += block[std::size_t(j)];
                     next[merged] += q * pmf;
                   }
                 });
    dist = std::move(next);
  }
  return dist;
}

CountsDist enumerate_resample_kernel(const TypeCounts& counts) {
  check_enum_caps(counts);
  const int r = counts.types();
  Eigen::RowVectorXd probs =
      counts.counts().cast<double>().transpose() / double(counts.population());
  CountsDist dist;
  std::vector<long long> scratch;
  compositions(counts.population(), r, scratch,
               [&](const std::vector<long long>& outcome) {
                 double pmf = multinomial_pmf(outcome, probs);
                 if (pmf > 0.0) dist[outcome] += pmf;
               });
  return dist;
}

CountsDist enumerate_step_kernel(const TypeCounts& counts,
                                 const StochasticMatrix& p, Model model) {
  CountsDist internal = enumerate_internal_kernel(counts, p);
  if (model == Model::Mamwid) return internal;
  CountsDist out;
  for (const auto& [mid, q] : internal) {
    TypeCounts mid_counts(Eigen::Map<const VecI>(mid.data(), long(mid.size())),
                          counts.population());
    for (const auto& [fin, q2] : enumerate_resample_kernel(mid_counts))
      out[fin] += q * q2;
  }
  return out;
}

CountsDist enumerate_chain_law(const ChainConfig& cfg, long long k_steps) {
  cfg.validate();
  check_enum_caps(cfg.initial);
  std::vector<long long> start(std::size_t(cfg.initial.types()));
  for (int i = 0; i < cfg.initial.types(); ++i) start[std::size_t(i)] =
      cfg.initial[i];
  CountsDist law{{start, 1.0}};
  for (long long k = 0; k < k_steps; ++k) {
    StochasticMatrix p = internal_transition_matrix(cfg.env.value_at_step(k),
                                                    cfg.population);
    CountsDist next;
    for (const auto& [state, q] : law) {
      TypeCounts counts(
          Eigen::Map<const VecI>(state.data(), long(state.size())),
          cfg.population);
      for (const auto& [fin, q2] : enumerate_step_kernel(counts, p, cfg.model))
        next[fin] += q * q2;
    }
    law = std::move(next);
  }
  return law;
}

// --- exact polynomial moments -------------------------------------------

namespace {

// Stirling numbers of the second kind up to the degree cap.
double stirling2(int n, int k) {
  static const double table[5][5] = {{1, 0, 0, 0, 0},
                                     {0, 1, 0, 0, 0},
                                     {0, 1, 1, 0, 0},
                                     {0, 1, 3, 1, 0},
                                     {0, 1, 7, 6, 1}};
  if (n < 0 || k < 0 || n > 4 || k > 4) throw DegreeTooHigh(n);
  return table[n][k];
}

double falling_factorial(double x, int k) {
  double out = 1.0;
  for (int i = 0; i < k; ++i) out *= (x - double(i));
  return out;
}

// Set partitions of {0..k-1} as restricted growth strings.
void for_each_partition(int k,
                        const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> rgs(std::size_t(k), 0);
  std::function<void(int, int)> rec = [&](int pos, int max_block) {
    if (pos == k) {
      fn(rgs);
      return;
    }
    for (int b = 0; b <= max_block + 1; ++b) {
      rgs[std::size_t(pos)] = b;
      rec(pos + 1, std::max(max_block, b));
    }
  };
  if (k == 0)
    fn(rgs);
  else
    rec(0, -1);
}

// Joint factorial moment E[prod_j (n'_j)_(m_j)] of one internal substep,
// from the log-derivatives of the generating functional
// prod_i (P_{i.} v)^{n_i} at v = 1.
double internal_factorial_moment(const TypeCounts& counts,
                                 const Eigen::MatrixXd& p,
                                 const std::vector<int>& m) {
  std::vector<int> labels;  // coordinate of each derivative slot
  for (std::size_t j = 0; j < m.size(); ++j)
    for (int c = 0; c < m[j]; ++c) labels.push_back(int(j));
  const int k = int(labels.size());
  if (k == 0) return 1.0;
  if (k > PolynomialTestFn::kMaxDegree) throw DegreeTooHigh(k);

  const int r = counts.types();
  double total = 0.0;
  for_each_partition(k, [&](const std::vector<int>& rgs) {
    int blocks = *std::max_element(rgs.begin(), rgs.end()) + 1;
    double prod = 1.0;
    for (int b = 0; b < blocks; ++b) {
      int size = 0;
      for (int slot = 0; slot < k; ++slot)
        if (rgs[std::size_t(slot)] == b) ++size;
      double sum = 0.0;
      for (int i = 0; i < r; ++i) {
        double term = double(counts[i]);
        for (int slot = 0; slot < k; ++slot)
          if (rgs[std::size_t(slot)] == b)
            term *= p(i, labels[std::size_t(slot)]);
        sum += term;
      }
      double sign = (size % 2 == 1) ? 1.0 : -1.0;
      prod *= sign * factorial(size - 1) * sum;
    }
    total += prod;
  });
  return total;
}

using CountsPoly = std::map<std::vector<int>, double>;

// E[prod_j (w'_j)^{beta_j} | w] for w' ~ multinomial(N, w/N), expanded as a
// polynomial in the pre-resampling counts w.
CountsPoly resample_monomial_poly(const std::vector<int>& beta, long long n) {
  const int r = int(beta.size());
  CountsPoly poly;
  std::vector<int> m(std::size_t(r), 0);
  std::function<void(int)> rec = [&](int j) {
    if (j == r) {
      int total = 0;
      double s2 = 1.0;
      for (int l = 0; l < r; ++l) {
        s2 *= stirling2(beta[std::size_t(l)], m[std::size_t(l)]);
        total += m[std::size_t(l)];
      }
      if (s2 == 0.0) return;
      double coeff = s2 * falling_factorial(double(n), total) /
                     std::pow(double(n), double(total));
      poly[m] += coeff;
      return;
    }
    for (int v = 0; v <= beta[std::size_t(j)]; ++v) {
      m[std::size_t(j)] = v;
      rec(j + 1);
    }
    m[std::size_t(j)] = 0;
  };
  rec(0);
  return poly;
}

double expect_counts_poly_internal(const CountsPoly& poly,
                                   const TypeCounts& counts,
                                   const Eigen::MatrixXd& p) {
  double out = 0.0;
  for (const auto& [beta, coeff] : poly) {
    // raw moment from factorial moments
    double raw = 0.0;
    std::vector<int> m(beta.size(), 0);
    std::function<void(std::size_t, double)> rec = [&](std::size_t j,
                                                       double s2) {
      if (j == beta.size()) {
        raw += s2 * internal_factorial_moment(counts, p, m);
        return;
      }
      for (int v = 0; v <= beta[j]; ++v) {
        double w = stirling2(beta[j], v);
        if (w == 0.0) continue;
        m[j] = v;
        rec(j + 1, s2 * w);
      }
      m[j] = 0;
    };
    rec(0, 1.0);
    out += coeff * raw;
  }
  return out;
}

CountsPoly polynomial_in_counts(const PolynomialTestFn& f, long long n) {
  CountsPoly poly;
  for (const auto& [alpha, c] : f.terms()) {
    int deg = 0;
    for (int e : alpha) deg += e;
    poly[alpha] += c / std::pow(double(n), double(deg));
  }
  return poly;
}

}  // namespace

double internal_monomial_moment(const TypeCounts& counts,
                                const StochasticMatrix& p,
                                const std::vector<int>& beta) {
  CountsPoly poly{{beta, 1.0}};
  return expect_counts_poly_internal(poly, counts, p.entries());
}

double discrete_generator_apply(const PolynomialTestFn& f,
                                const SimplexPoint& p, Model model,
                                const RateMatrix& a_step, long long n) {
  if (f.dim() != p.types() || a_step.types() != p.types())
    throw ValidationError("generator", "dimension mismatch");
  StochasticMatrix trans = internal_transition_matrix(a_step, n);
  TypeCounts counts = point_to_counts(p, n);
  for (int i = 0; i < p.types(); ++i)
    if (std::abs(p[i] * double(n) - double(counts[i])) > 1e-6)
      throw ValidationError("generator", "point is not on the K_N lattice");

  CountsPoly next_poly;  // E[f | intermediate counts] as polynomial
  if (model == Model::Mamwid) {
    next_poly = polynomial_in_counts(f, n);
  } else {
    for (const auto& [alpha, c] : f.terms()) {
      int deg = 0;
      for (int e : alpha) deg += e;
      double scale = c / std::pow(double(n), double(deg));
      for (const auto& [m, coeff] : resample_monomial_poly(alpha, n))
        next_poly[m] += scale * coeff;
    }
  }
  double expected =
      expect_counts_poly_internal(next_poly, counts, trans.entries());
  return double(n) * (expected - f(p.coords()));
}

double discrete_generator_enumerate(const PolynomialTestFn& f,
                                    const SimplexPoint& p, Model model,
                                    const RateMatrix& a_step, long long n) {
  StochasticMatrix trans = internal_transition_matrix(a_step, n);
  TypeCounts counts = point_to_counts(p, n);
  CountsDist law = enumerate_step_kernel(counts, trans, model);
  double expected = 0.0;
  for (const auto& [state, q] : law) {
    Eigen::VectorXd x(long(state.size()));
    for (std::size_t j = 0; j < state.size(); ++j)
      x[long(j)] = double(state[j]) / double(n);
    expected += q * f(x);
  }
  return double(n) * (expected - f(p.coords()));
}

}  // namespace typeflow
