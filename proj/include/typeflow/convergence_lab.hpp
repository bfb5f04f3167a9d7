#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "typeflow/agent_chain.hpp"
#include "typeflow/limit_models.hpp"
#include "typeflow/moment_hierarchy.hpp"

namespace typeflow {

/// Run fn(i) for i in [0, count) on a small worker pool. Results must be
/// written to preallocated slots so the outcome is identical for any
/// thread count.
void parallel_for(long long count, int threads,
                  const std::function<void(long long)>& fn);

/// Replicate-indexed collection of paths sharing one scenario.
struct Ensemble {
  std::vector<SimplexPath> paths;
  std::vector<std::uint64_t> streams;
  std::string scenario_id;
  std::vector<std::uint64_t> env_draw_ids;  // empty for deterministic envs
};

/// Run `replicates` chains of one configuration in parallel; replicate i
/// draws from the stream keyed by (seed, purpose, i).
Ensemble run_chain_ensemble(const ChainConfig& cfg, int replicates,
                            std::uint64_t seed, std::uint64_t purpose,
                            int threads, const std::string& scenario_id = "");

/// Max over the union grid (restricted to [0, T]) of the max-coordinate
/// absolute difference.
double sup_error(const SimplexPath& path, const SimplexPath& ref, double T);

struct RateFit {
  double slope = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double std_error = 0.0;
};

/// Least-squares slope of log(error) against log(N) with a normal-theory
/// 95% confidence interval.
RateFit rate_fit(const std::vector<double>& n_values,
                 const std::vector<double>& errors);

struct ConvergenceReport {
  std::vector<long long> n_values;
  std::vector<double> mean_sup_error;
  std::vector<double> std_sup_error;
  RateFit fit;
  bool errors_decreasing = false;
  bool pass = false;  // decreasing and slope CI excludes zero
};

/// Ensemble sup-error of the internal-dynamics chain against the ODE limit
/// across a ladder of population sizes.
ConvergenceReport mamwid_convergence(const EnvPath& env, const SimplexPoint& x0,
                                     double T,
                                     const std::vector<long long>& n_list,
                                     int replicates, std::uint64_t seed,
                                     int threads, double h_ode = 1e-3);

struct MomentCheck {
  std::vector<int> alpha;
  double t = 0.0;
  double empirical = 0.0;
  double exact = 0.0;
  double z = 0.0;
};

struct MomentTestReport {
  long long population = 0;
  int replicates = 0;
  int n_max = 0;
  std::vector<double> checkpoints;
  std::vector<MomentCheck> checks;
  double max_abs_z = 0.0;
  bool pass = false;  // all |z| <= 4
};

/// Empirical monomial moments of the sampling chain at checkpoint times
/// against the moment hierarchy, gated at four sigma.
MomentTestReport mamwidams_moment_test(const EnvPath& env,
                                       const SimplexPoint& x0, double T,
                                       long long population, int replicates,
                                       int n_max, std::uint64_t seed,
                                       int threads, double h = 1e-3,
                                       std::vector<double> checkpoints = {});

struct GapScan {
  std::vector<long long> n_values;
  std::vector<double> sup_gap;
  std::vector<double> gap_times_n;
  std::vector<double> halving_ratio;  // consecutive gap ratios
};

/// Sup over sampled (t, p in K_N) of |discrete generator - limit
/// generator|, per population size. The discrete side is evaluated from
/// exact moments, so any N is allowed.
GapScan generator_gap_scan(Model model, const EnvPath& env,
                           const PolynomialTestFn& f,
                           const std::vector<long long>& n_list, double T,
                           int grid_density);

double ks_two_sample_statistic(std::vector<double> a, std::vector<double> b);
double ks_p_value(double statistic, std::size_t n1, std::size_t n2);

struct AnnealedReport {
  long long population = 0;
  int m_env = 0;
  int m_chain = 0;
  std::vector<double> checkpoints;
  // samples[checkpoint][coordinate][draw]
  std::vector<std::vector<std::vector<double>>> annealed_samples;
  std::vector<std::vector<std::vector<double>>> mixture_samples;
  std::vector<std::vector<std::vector<double>>> limit_samples;
  std::vector<std::vector<double>> ks_stat;  // [checkpoint][coordinate]
  std::vector<std::vector<double>> ks_p;
  std::vector<std::vector<double>> limit_ks_stat;  // finite N vs limit mixture
  double level = 0.01;
  int tests = 0;
  double min_p = 1.0;
  bool ks_pass = false;
};

/// Annealed-vs-mixture test: (a) fresh environment per replicate
/// (annealed draw), (b) M_env environments with M_chain chains each pooled
/// (mixture draw); the two laws are compared coordinatewise by two-sample
/// Kolmogorov-Smirnov at the checkpoints, Bonferroni-adjusted. Finite-N
/// marginals are also compared against the mixture of per-environment
/// limits (reported, not gated).
AnnealedReport quenched_annealed_test(const RandomEnvSpec& spec, Model model,
                                      const SimplexPoint& x0, double T,
                                      long long population, int m_env,
                                      int m_chain, std::uint64_t seed,
                                      int threads,
                                      std::vector<double> checkpoints = {},
                                      double h_limit = 1e-3);

}  // namespace typeflow
