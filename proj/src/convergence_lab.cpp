#include "typeflow/convergence_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

namespace typeflow {

void parallel_for(long long count, int threads,
                  const std::function<void(long long)>& fn) {
  if (threads <= 0) threads = int(std::thread::hardware_concurrency());
  if (threads <= 1 || count <= 1) {
    for (long long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long long> next{0};
  auto worker = [&]() {
    for (;;) {
      long long i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  int spawn = int(std::min<long long>(threads, count));
  pool.reserve(std::size_t(spawn));
  for (int w = 0; w < spawn; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

Ensemble run_chain_ensemble(const ChainConfig& cfg, int replicates,
                            std::uint64_t seed, std::uint64_t purpose,
                            int threads, const std::string& scenario_id) {
  auto seq = transition_sequence(cfg);
  Ensemble ensemble;
  ensemble.scenario_id = scenario_id;
  ensemble.paths.assign(
      std::size_t(replicates),
      SimplexPath({0.0}, {counts_to_point(cfg.initial)},
                  Interp::PiecewiseConstant));
  ensemble.streams.assign(std::size_t(replicates), 0);
  parallel_for(replicates, threads, [&](long long rep) {
    std::uint64_t stream = mix_stream(purpose, std::uint64_t(rep));
    Rng rng(seed, stream);
    ensemble.paths[std::size_t(rep)] = simulate(cfg, seq, rng);
    ensemble.streams[std::size_t(rep)] = stream;
  });
  return ensemble;
}

double sup_error(const SimplexPath& path, const SimplexPath& ref, double T) {
  if (path.horizon() + 1e-9 < T || ref.horizon() + 1e-9 < T)
    throw GridMismatch("paths do not cover [0, " + std::to_string(T) + "]");
  std::set<double> times{0.0, T};
  for (double t : path.grid())
    if (t <= T) times.insert(t);
  for (double t : ref.grid())
    if (t <= T) times.insert(t);
  double worst = 0.0;
  for (double t : times) {
    Eigen::VectorXd d = path.evaluate(t) - ref.evaluate(t);
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return worst;
}

RateFit rate_fit(const std::vector<double>& n_values,
                 const std::vector<double>& errors) {
  if (n_values.size() != errors.size() || n_values.size() < 3)
    throw DegenerateFit("need at least 3 (N, error) points");
  const std::size_t m = n_values.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(n_values[i] > 0.0) || !(errors[i] > 0.0) ||
        !std::isfinite(errors[i]))
      throw DegenerateFit("errors must be positive and finite");
    lx[i] = std::log(n_values[i]);
    ly[i] = std::log(errors[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= double(m);
  my /= double(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw DegenerateFit("N values must vary");
  RateFit fit;
  fit.slope = sxy / sxx;
  double intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double resid = ly[i] - (intercept + fit.slope * lx[i]);
    rss += resid * resid;
  }
  double dof = double(m) - 2.0;
  fit.std_error = dof > 0.0 ? std::sqrt(rss / dof / sxx) : 0.0;
  // two-sided 95% Student-t quantiles
  static const double t975[] = {12.706, 4.303, 3.182, 2.776, 2.571,
                                2.447,  2.365, 2.306, 2.262, 2.228,
                                2.201,  2.179, 2.160, 2.145, 2.131};
  int idx = int(dof) - 1;
  double tq = idx < 15 ? t975[idx] : (dof <= 30 ? 2.04 : 1.96);
  fit.ci_lo = fit.slope - tq * fit.std_error;
  fit.ci_hi = fit.slope + tq * fit.std_error;
  return fit;
}

ConvergenceReport mamwid_convergence(const EnvPath& env, const SimplexPoint& x0,
                                     double T,
                                     const std::vector<long long>& n_list,
                                     int replicates, std::uint64_t seed,
                                     int threads, double h_ode) {
  SimplexPath ref = solve_limit_ode(env, x0, T, h_ode);
  ConvergenceReport report;
  report.n_values = n_list;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    long long n = n_list[ni];
    StepEnvPath step_env = discretize(env, n, T);
    ChainConfig cfg{Model::Mamwid, n, step_env, T, point_to_counts(x0, n)};
    Ensemble ensemble = run_chain_ensemble(
        cfg, replicates, seed, mix_stream(0x636F6E76ULL, std::uint64_t(n)),
        threads);
    std::vector<double> errors(static_cast<std::size_t>(replicates));
    parallel_for(replicates, threads, [&](long long rep) {
      errors[std::size_t(rep)] =
          sup_error(ensemble.paths[std::size_t(rep)], ref, T);
    });
    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= double(replicates);
    double var = 0.0;
    for (double e : errors) var += (e - mean) * (e - mean);
    var = replicates > 1 ? var / double(replicates - 1) : 0.0;
    report.mean_sup_error.push_back(mean);
    report.std_sup_error.push_back(std::sqrt(var));
  }
  bool degenerate = false;
  for (double e : report.mean_sup_error)
    if (e <= 0.0) degenerate = true;
  if (degenerate) {
    // a zero-error ladder (e.g. a frozen environment) has no rate to fit
    report.fit = RateFit{};
    report.errors_decreasing = false;
    report.pass = true;
    for (double e : report.mean_sup_error)
      if (e != 0.0) report.pass = false;
    return report;
  }
  std::vector<double> nv(n_list.begin(), n_list.end());
  report.fit = rate_fit(nv, report.mean_sup_error);
  report.errors_decreasing = true;
  for (std::size_t i = 1; i < report.mean_sup_error.size(); ++i)
    if (report.mean_sup_error[i] >= report.mean_sup_error[i - 1])
      report.errors_decreasing = false;
  report.pass = report.errors_decreasing && report.fit.ci_hi < 0.0;
  return report;
}

MomentTestReport mamwidams_moment_test(const EnvPath& env,
                                       const SimplexPoint& x0, double T,
                                       long long population, int replicates,
                                       int n_max, std::uint64_t seed,
                                       int threads, double h,
                                       std::vector<double> checkpoints) {
  if (checkpoints.empty()) checkpoints = {T / 2.0, T};
  const int r = x0.types();
  auto blocks = solve_moment_hierarchy(
      env, point_mass_initial_moments(x0, n_max), T, h);
  for (double& c : checkpoints) {
    // snap to the nearest hierarchy grid node
    const auto& grid = blocks.front().grid;
    double best = grid.front();
    for (double t : grid)
      if (std::abs(t - c) < std::abs(best - c)) best = t;
    c = best;
  }

  StepEnvPath step_env = discretize(env, population, T);
  ChainConfig cfg{Model::Mamwidams, population, step_env, T,
                  point_to_counts(x0, population)};
  auto seq = transition_sequence(cfg);

  // state at each checkpoint, per replicate
  std::vector<std::vector<Eigen::VectorXd>> states(
      checkpoints.size(), std::vector<Eigen::VectorXd>(std::size_t(replicates)));
  parallel_for(replicates, threads, [&](long long rep) {
    Rng rng(seed, mix_stream(0x6D6F6D74ULL, std::uint64_t(rep)));
    SimplexPath path = simulate(cfg, seq, rng);
    for (std::size_t c = 0; c < checkpoints.size(); ++c)
      states[c][std::size_t(rep)] = path.evaluate(checkpoints[c]);
  });

  MomentTestReport report;
  report.population = population;
  report.replicates = replicates;
  report.n_max = n_max;
  report.checkpoints = checkpoints;
  for (int n = 1; n <= n_max; ++n) {
    MultiIndexSet set = MultiIndexSet::build(n, r);
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      const Eigen::VectorXd& exact =
          blocks[std::size_t(n - 1)].at_time(checkpoints[c]);
      for (std::size_t a = 0; a < set.size(); ++a) {
        const auto& alpha = set.indices[a];
        double mean = 0.0, m2 = 0.0;
        for (int rep = 0; rep < replicates; ++rep) {
          const Eigen::VectorXd& x = states[c][std::size_t(rep)];
          double v = 1.0;
          for (int i = 0; i < r; ++i)
            for (int e = 0; e < alpha[std::size_t(i)]; ++e) v *= x[i];
          double delta = v - mean;
          mean += delta / double(rep + 1);
          m2 += delta * (v - mean);
        }
        double sd = replicates > 1
                        ? std::sqrt(m2 / double(replicates - 1))
                        : 0.0;
        double se = sd / std::sqrt(double(replicates));
        MomentCheck check;
        check.alpha = alpha;
        check.t = checkpoints[c];
        check.empirical = mean;
        check.exact = exact[long(a)];
        double diff = mean - check.exact;
        if (se > 0.0)
          check.z = diff / se;
        else
          check.z = std::abs(diff) < 1e-9 ? 0.0 : 1e12 * diff;
        report.checks.push_back(check);
        report.max_abs_z = std::max(report.max_abs_z, std::abs(check.z));
      }
    }
  }
  report.pass = report.max_abs_z <= 4.0;
  return report;
}

GapScan generator_gap_scan(Model model, const EnvPath& env,
                           const PolynomialTestFn& f,
                           const std::vector<long long>& n_list, double T,
                           int grid_density) {
  const int r = env.types();
  GapScan scan;
  scan.n_values = n_list;
  for (long long n : n_list) {
    StepEnvPath step_env = discretize(env, n, T);
    long long total_steps = (long long)(std::ceil(double(n) * T - 1e-9));
    long long t_stride =
        std::max<long long>(1, total_steps / std::max(1, grid_density));
    double worst = 0.0;
    // lattice points of K_N, sampled at the requested density
    std::vector<VecI> lattice;
    if (r == 2) {
      long long stride =
          std::max<long long>(1, n / std::max(1, grid_density));
      for (long long j = 0; j <= n; j += stride) {
        VecI c(2);
        c << j, n - j;
        lattice.push_back(c);
      }
    } else {
      long long stride =
          std::max<long long>(1, n / std::max(1, grid_density / 2));
      std::function<void(int, long long, VecI&)> rec =
          [&](int pos, long long remaining, VecI& cur) {
            if (pos == r - 1) {
              cur[pos] = remaining;
              lattice.push_back(cur);
              return;
            }
            for (long long v = 0; v <= remaining; v += stride) {
              cur[pos] = v;
              rec(pos + 1, remaining - v, cur);
            }
            if (remaining % stride != 0) {
              cur[pos] = remaining;
              rec(pos + 1, 0, cur);
            }
          };
      VecI cur(r);
      rec(0, n, cur);
    }
    for (long long k = 0; k < total_steps; k += t_stride) {
      double t = double(k) / double(n);
      RateMatrix a_step = step_env.value_at_step(k);
      RateMatrix a_limit = env.evaluate(t);
      for (const auto& c : lattice) {
        SimplexPoint p = counts_to_point(TypeCounts(c, n));
        double d = discrete_generator_apply(f, p, model, a_step, n);
        double g = model == Model::Mamwid ? apply_GA(f, p, a_limit)
                                          : apply_GAB(f, p, a_limit);
        worst = std::max(worst, std::abs(d - g));
      }
    }
    scan.sup_gap.push_back(worst);
    scan.gap_times_n.push_back(worst * double(n));
  }
  for (std::size_t i = 0; i + 1 < scan.sup_gap.size(); ++i)
    scan.halving_ratio.push_back(
        scan.sup_gap[i + 1] > 0.0 ? scan.sup_gap[i] / scan.sup_gap[i + 1]
                                  : std::numeric_limits<double>::infinity());
  return scan;
}

double ks_two_sample_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw ValidationError("ks", "empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    double fa = double(i) / double(a.size());
    double fb = double(j) / double(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

double ks_p_value(double statistic, std::size_t n1, std::size_t n2) {
  double ne = double(n1) * double(n2) / double(n1 + n2);
  double sq = std::sqrt(ne);
  double lambda = (sq + 0.12 + 0.11 / sq) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * lambda * lambda * double(k) * double(k));
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

AnnealedReport quenched_annealed_test(const RandomEnvSpec& spec, Model model,
                                      const SimplexPoint& x0, double T,
                                      long long population, int m_env,
                                      int m_chain, std::uint64_t seed,
                                      int threads,
                                      std::vector<double> checkpoints,
                                      double h_limit) {
  spec.validate();
  if (checkpoints.empty()) checkpoints = {T / 2.0, T};
  const int r = x0.types();
  const std::size_t n_check = checkpoints.size();

  AnnealedReport report;
  report.population = population;
  report.m_env = m_env;
  report.m_chain = m_chain;
  report.checkpoints = checkpoints;

  auto alloc = [&](std::size_t per) {
    return std::vector<std::vector<std::vector<double>>>(
        n_check, std::vector<std::vector<double>>(
                     std::size_t(r), std::vector<double>(per, 0.0)));
  };
  report.annealed_samples = alloc(std::size_t(m_env));
  report.mixture_samples = alloc(std::size_t(m_env) * std::size_t(m_chain));
  std::size_t limit_per = model == Model::Mamwid
                              ? std::size_t(m_env)
                              : std::size_t(m_env) * std::size_t(m_chain);
  report.limit_samples = alloc(limit_per);

  // (a) annealed: a fresh environment for every replicate
  parallel_for(m_env, threads, [&](long long e) {
    Rng env_rng(seed, mix_stream(0x616E6E65ULL, std::uint64_t(e)));
    EnvPath env = sample_env(spec, T, env_rng);
    StepEnvPath step_env = discretize(env, population, T);
    ChainConfig cfg{model, population, step_env, T,
                    point_to_counts(x0, population)};
    Rng chain_rng(seed, mix_stream(0x6368616EULL, std::uint64_t(e)));
    SimplexPath path = simulate(cfg, chain_rng);
    for (std::size_t c = 0; c < n_check; ++c) {
      Eigen::VectorXd x = path.evaluate(checkpoints[c]);
      for (int i = 0; i < r; ++i)
        report.annealed_samples[c][std::size_t(i)][std::size_t(e)] = x[i];
    }
  });

  // (b) mixture: M_env environments, M_chain chains per environment,
  // plus the per-environment limit (quenched) sample
  parallel_for(m_env, threads, [&](long long e) {
    Rng env_rng(seed, mix_stream(0x6D697865ULL, std::uint64_t(e)));
    EnvPath env = sample_env(spec, T, env_rng);
    StepEnvPath step_env = discretize(env, population, T);
    ChainConfig cfg{model, population, step_env, T,
                    point_to_counts(x0, population)};
    auto seq = transition_sequence(cfg);
    for (long long ch = 0; ch < m_chain; ++ch) {
      Rng chain_rng(seed, mix_stream(0x6D697863ULL, std::uint64_t(e),
                                     std::uint64_t(ch)));
      SimplexPath path = simulate(cfg, seq, chain_rng);
      std::size_t slot = std::size_t(e) * std::size_t(m_chain) + std::size_t(ch);
      for (std::size_t c = 0; c < n_check; ++c) {
        Eigen::VectorXd x = path.evaluate(checkpoints[c]);
        for (int i = 0; i < r; ++i)
          report.mixture_samples[c][std::size_t(i)][slot] = x[i];
      }
    }
    if (model == Model::Mamwid) {
      SimplexPath limit = solve_limit_ode(env, x0, T, h_limit);
      for (std::size_t c = 0; c < n_check; ++c) {
        Eigen::VectorXd x = limit.evaluate(checkpoints[c]);
        for (int i = 0; i < r; ++i)
          report.limit_samples[c][std::size_t(i)][std::size_t(e)] = x[i];
      }
    } else {
      for (long long ch = 0; ch < m_chain; ++ch) {
        DiffusionConfig dcfg{env, x0, T, 1e-3, 0};
        Rng diff_rng(seed, mix_stream(0x64696666ULL, std::uint64_t(e),
                                      std::uint64_t(ch)));
        SimplexPath limit = simulate_diffusion(dcfg, diff_rng);
        std::size_t slot =
            std::size_t(e) * std::size_t(m_chain) + std::size_t(ch);
        for (std::size_t c = 0; c < n_check; ++c) {
          Eigen::VectorXd x = limit.evaluate(checkpoints[c]);
          for (int i = 0; i < r; ++i)
            report.limit_samples[c][std::size_t(i)][slot] = x[i];
        }
      }
    }
  });

  report.ks_stat.assign(n_check, std::vector<double>(std::size_t(r), 0.0));
  report.ks_p.assign(n_check, std::vector<double>(std::size_t(r), 1.0));
  report.limit_ks_stat.assign(n_check,
                              std::vector<double>(std::size_t(r), 0.0));
  report.tests = int(n_check) * r;
  for (std::size_t c = 0; c < n_check; ++c) {
    for (int i = 0; i < r; ++i) {
      const auto& a = report.annealed_samples[c][std::size_t(i)];
      const auto& b = report.mixture_samples[c][std::size_t(i)];
      double d = ks_two_sample_statistic(a, b);
      report.ks_stat[c][std::size_t(i)] = d;
      double p = ks_p_value(d, a.size(), b.size());
      report.ks_p[c][std::size_t(i)] = p;
      report.min_p = std::min(report.min_p, p);
      report.limit_ks_stat[c][std::size_t(i)] = ks_two_sample_statistic(
          a, report.limit_samples[c][std::size_t(i)]);
    }
  }
  report.ks_pass = report.min_p > report.level / double(report.tests);
  return report;
}

}  // namespace typeflow
