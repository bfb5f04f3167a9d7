#pragma once

#include <map>
#include <span>
#include <vector>

#include "typeflow/environment.hpp"
#include "typeflow/polynomial.hpp"
#include "typeflow/rng.hpp"
#include "typeflow/simplex_core.hpp"

namespace typeflow {

/// mamwid: per-type internal switching only.
/// mamwidams: internal switching to k+1/2, then global multinomial
/// resampling from the empirical distribution to k+1.
enum class Model { Mamwid, Mamwidams };

struct ChainConfig {
  Model model;
  long long population;  // N
  StepEnvPath env;
  double horizon;  // T in rescaled time; the chain runs ceil(N T) steps
  TypeCounts initial;

  void validate() const;
};

struct ChainState {
  long long step_index;
  TypeCounts counts;
};

/// One internal-dynamics substep: each type's agents split independently,
/// type i contributing a multinomial(n_i, row i of P) block.
TypeCounts internal_step(const TypeCounts& counts, const StochasticMatrix& p,
                         Rng& rng);

/// Global resampling: every agent redraws its type from counts/N.
TypeCounts multinomial_resample(const TypeCounts& counts, Rng& rng);

ChainState step(const ChainState& state, const ChainConfig& cfg, Rng& rng);

/// The transition matrices P_{N,k} = I + A_N(k/N)/N for every step of a run.
std::vector<StochasticMatrix> transition_sequence(const ChainConfig& cfg);

/// Run the chain and return the empirical-distribution path on {k/N}.
SimplexPath simulate(const ChainConfig& cfg, Rng& rng);
SimplexPath simulate(const ChainConfig& cfg,
                     std::span<const StochasticMatrix> p_seq, Rng& rng);

/// Conditional probability generating functional of the internal chain,
///   E[prod_i v_i^{n_i(m+k)} | n(m)]  with P_seq = (P_{N,m},...,P_{N,m+k-1}).
double pgf_eval(const Eigen::VectorXd& v, const TypeCounts& counts_m,
                std::span<const StochasticMatrix> p_seq);

/// E[n(m+k) | n(m)] = n(m) P_{N,m} ... P_{N,m+k-1}.
Eigen::VectorXd exact_conditional_mean(const TypeCounts& counts_m,
                                       std::span<const StochasticMatrix> p_seq);

/// E[(n_j(m+k) - n_j(m))^2 | n(m)], the closed four-term expression.
double exact_conditional_sqdiff(const TypeCounts& counts_m,
                                std::span<const StochasticMatrix> p_seq,
                                int j);

// --- Exact small-system enumeration (test oracles) ---------------------

/// Distribution over occupancy vectors, keyed by the count vector.
using CountsDist = std::map<std::vector<long long>, double>;

inline constexpr long long kEnumMaxPopulation = 12;
inline constexpr int kEnumMaxTypes = 3;

CountsDist enumerate_internal_kernel(const TypeCounts& counts,
                                     const StochasticMatrix& p);
CountsDist enumerate_resample_kernel(const TypeCounts& counts);
CountsDist enumerate_step_kernel(const TypeCounts& counts,
                                 const StochasticMatrix& p, Model model);

/// Exact k-step law of the chain started from a deterministic state.
CountsDist enumerate_chain_law(const ChainConfig& cfg, long long k_steps);

// --- Discrete generators ------------------------------------------------

/// N (E[f(next/N) | p] - f(p)) computed exactly from closed-form
/// multinomial moments (factorial-moment expansion); any N, degree <= 4.
double discrete_generator_apply(const PolynomialTestFn& f,
                                const SimplexPoint& p, Model model,
                                const RateMatrix& a_step, long long n);

/// Same quantity by brute-force outcome enumeration; requires
/// N <= kEnumMaxPopulation and r <= kEnumMaxTypes.
double discrete_generator_enumerate(const PolynomialTestFn& f,
                                    const SimplexPoint& p, Model model,
                                    const RateMatrix& a_step, long long n);

/// Exact E[prod_j (n'_j)^{beta_j} | counts] after one internal substep.
double internal_monomial_moment(const TypeCounts& counts,
                                const StochasticMatrix& p,
                                const std::vector<int>& beta);

}  // namespace typeflow
