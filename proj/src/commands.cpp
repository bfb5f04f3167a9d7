#include "typeflow/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "typeflow/convergence_lab.hpp"

namespace typeflow {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx", (unsigned long long)(h));
  return buf;
}

std::string alpha_key(const std::vector<int>& alpha) {
  std::string out;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i) out += ":";
    out += std::to_string(alpha[i]);
  }
  return out;
}

struct OutputContext {
  fs::path dir;
  std::uint64_t hash;
  std::uint64_t seed;

  std::ofstream open(const std::string& name) const {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot open output file " + (dir / name).string());
    out << "# scenario_hash=" << hash_hex(hash) << " seed=" << seed << "\n";
    return out;
  }

  void write_json(const std::string& name, json j) const {
    j["schema_version"] = 1;
    j["scenario_hash"] = hash_hex(hash);
    j["master_seed"] = seed;
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot open output file " + (dir / name).string());
    out << j.dump(2) << "\n";
  }
};

void write_path_csv(const OutputContext& ctx, const std::string& name,
                    const SimplexPath& path) {
  std::ofstream out = ctx.open(name);
  out << "t";
  for (int i = 1; i <= path.types(); ++i) out << ",x_" << i;
  out << "\n";
  for (std::size_t k = 0; k < path.size(); ++k) {
    out << fmt(path.grid()[k]);
    const auto& p = path.points()[k];
    for (int i = 0; i < path.types(); ++i) out << "," << fmt(p[i]);
    out << "\n";
  }
}

void write_plot_columns(const OutputContext& ctx, const std::string& stem,
                        const SimplexPath& path) {
  for (int i = 0; i < path.types(); ++i) {
    std::ofstream out =
        ctx.open("plot_" + stem + "_x" + std::to_string(i + 1) + ".dat");
    for (std::size_t k = 0; k < path.size(); ++k)
      out << fmt(path.grid()[k]) << " " << fmt(path.points()[k][i]) << "\n";
  }
}

Model chain_model(ScenarioModel m) {
  switch (m) {
    case ScenarioModel::Mamwid:
    case ScenarioModel::Mamwidare:
      return Model::Mamwid;
    case ScenarioModel::Mamwidams:
    case ScenarioModel::Mamwidmsare:
      return Model::Mamwidams;
  }
  throw Error("unreachable");
}

bool random_model(ScenarioModel m) {
  return m == ScenarioModel::Mamwidare || m == ScenarioModel::Mamwidmsare;
}

SimplexPoint initial_point(const Scenario& s) {
  switch (s.initial.kind) {
    case InitialConfig::Kind::Point:
      return SimplexPoint(s.initial.x0);
    case InitialConfig::Kind::Counts:
      return counts_to_point(TypeCounts(s.initial.counts, s.population));
    case InitialConfig::Kind::Dirichlet:
      throw ValidationError("initial",
                            "this subcommand needs a deterministic initial "
                            "condition (point or counts)");
  }
  throw Error("unreachable");
}

TypeCounts initial_counts(const Scenario& s, long long n, std::uint64_t seed,
                          long long replicate) {
  switch (s.initial.kind) {
    case InitialConfig::Kind::Point:
      return point_to_counts(SimplexPoint(s.initial.x0), n);
    case InitialConfig::Kind::Counts:
      if (n != s.population)
        return point_to_counts(
            counts_to_point(TypeCounts(s.initial.counts, s.population)), n);
      return TypeCounts(s.initial.counts, n);
    case InitialConfig::Kind::Dirichlet: {
      Rng rng(seed, mix_stream(0x696E6974ULL, std::uint64_t(replicate)));
      Eigen::VectorXd p = rng.dirichlet(s.initial.alpha);
      return TypeCounts(rng.multinomial(n, p), n);
    }
  }
  throw Error("unreachable");
}

std::vector<Eigen::VectorXd> initial_moments(const Scenario& s) {
  switch (s.initial.kind) {
    case InitialConfig::Kind::Point:
      return point_mass_initial_moments(SimplexPoint(s.initial.x0), s.n_max);
    case InitialConfig::Kind::Counts:
      return point_mass_initial_moments(
          counts_to_point(TypeCounts(s.initial.counts, s.population)),
          s.n_max);
    case InitialConfig::Kind::Dirichlet:
      return dirichlet_initial_moments(s.initial.alpha, s.n_max);
  }
  throw Error("unreachable");
}

int cmd_simulate(const Scenario& s, const OutputContext& ctx,
                 const RunOverrides& ov) {
  const Model model = chain_model(s.model);
  std::vector<SimplexPath> paths(std::size_t(s.replicates),
                                 SimplexPath({0.0}, {SimplexPoint::uniform(s.r)},
                                             Interp::PiecewiseConstant));
  if (random_model(s.model)) {
    RandomEnvSpec spec = s.env.build_random();
    parallel_for(s.replicates, ov.threads, [&](long long rep) {
      Rng env_rng(s.seed, mix_stream(0x73656E76ULL, std::uint64_t(rep)));
      EnvPath env = sample_env(spec, s.horizon, env_rng);
      ChainConfig cfg{model, s.population, discretize(env, s.population, s.horizon),
                      s.horizon, initial_counts(s, s.population, s.seed, rep)};
      Rng rng(s.seed, mix_stream(0x73696D63ULL, std::uint64_t(rep)));
      paths[std::size_t(rep)] = simulate(cfg, rng);
    });
  } else if (s.initial.kind == InitialConfig::Kind::Dirichlet) {
    EnvPath env = s.env.build_deterministic(s.horizon);
    StepEnvPath step_env = discretize(env, s.population, s.horizon);
    ChainConfig probe{model, s.population, step_env, s.horizon,
                      initial_counts(s, s.population, s.seed, 0)};
    auto seq = transition_sequence(probe);
    parallel_for(s.replicates, ov.threads, [&](long long rep) {
      ChainConfig cfg{model, s.population, step_env, s.horizon,
                      initial_counts(s, s.population, s.seed, rep)};
      Rng rng(s.seed, mix_stream(0x73696D63ULL, std::uint64_t(rep)));
      paths[std::size_t(rep)] = simulate(cfg, seq, rng);
    });
  } else {
    EnvPath env = s.env.build_deterministic(s.horizon);
    ChainConfig cfg{model, s.population, discretize(env, s.population, s.horizon),
                    s.horizon, initial_counts(s, s.population, s.seed, 0)};
    Ensemble ensemble = run_chain_ensemble(cfg, s.replicates, s.seed,
                                           0x73696D63ULL, ov.threads, s.name);
    paths = std::move(ensemble.paths);
  }
  for (int rep = 0; rep < s.replicates; ++rep) {
    char name[48];
    std::snprintf(name, sizeof(name), "path_%04d.csv", rep);
    write_path_csv(ctx, name, paths[std::size_t(rep)]);
  }
  if (ov.emit_plot_data) write_plot_columns(ctx, "path", paths[0]);
  return 0;
}

int cmd_limit_ode(const Scenario& s, const OutputContext& ctx,
                  const RunOverrides& ov) {
  EnvPath env = s.env.build_deterministic(s.horizon);
  SimplexPath path = solve_limit_ode(env, initial_point(s), s.horizon, s.h);
  write_path_csv(ctx, "limit_ode.csv", path);
  if (ov.emit_plot_data) write_plot_columns(ctx, "limit_ode", path);
  return 0;
}

int cmd_diffuse(const Scenario& s, const OutputContext& ctx,
                const RunOverrides& ov) {
  EnvPath env = s.env.build_deterministic(s.horizon);
  std::vector<SimplexPath> paths(std::size_t(s.replicates),
                                 SimplexPath({0.0}, {SimplexPoint::uniform(s.r)},
                                             Interp::PiecewiseLinear));
  parallel_for(s.replicates, ov.threads, [&](long long rep) {
    SimplexPoint x0 = s.initial.kind == InitialConfig::Kind::Dirichlet
                          ? [&] {
                              Rng rng(s.seed, mix_stream(0x696E6974ULL,
                                                         std::uint64_t(rep)));
                              return SimplexPoint(rng.dirichlet(s.initial.alpha));
                            }()
                          : initial_point(s);
    DiffusionConfig cfg{env, x0, s.horizon, s.dt, 0};
    Rng rng(s.seed, mix_stream(0x64696675ULL, std::uint64_t(rep)));
    paths[std::size_t(rep)] = simulate_diffusion(cfg, rng);
  });
  for (int rep = 0; rep < s.replicates; ++rep) {
    char name[48];
    std::snprintf(name, sizeof(name), "diffusion_%04d.csv", rep);
    write_path_csv(ctx, name, paths[std::size_t(rep)]);
  }
  if (ov.emit_plot_data) write_plot_columns(ctx, "diffusion", paths[0]);
  return 0;
}

int cmd_moments(const Scenario& s, const OutputContext& ctx,
                const RunOverrides& ov) {
  EnvPath env = s.env.build_deterministic(s.horizon);
  auto blocks = solve_moment_hierarchy(env, initial_moments(s), s.horizon, s.h);
  std::ofstream out = ctx.open("moments.csv");
  out << "t,alpha,value\n";
  for (const auto& block : blocks) {
    MultiIndexSet set = MultiIndexSet::build(block.order, s.r);
    for (std::size_t k = 0; k < block.grid.size(); ++k)
      for (std::size_t a = 0; a < set.size(); ++a)
        out << fmt(block.grid[k]) << "," << alpha_key(set.indices[a]) << ","
            << fmt(block.values[k][long(a)]) << "\n";
  }
  if (ov.emit_plot_data) {
    const auto& order1 = blocks.front();
    for (int i = 0; i < s.r; ++i) {
      std::ofstream plot =
          ctx.open("plot_moments_x" + std::to_string(i + 1) + ".dat");
      for (std::size_t k = 0; k < order1.grid.size(); ++k)
        plot << fmt(order1.grid[k]) << " " << fmt(order1.values[k][i]) << "\n";
    }
  }
  return 0;
}

int cmd_generator_check(const Scenario& s, const OutputContext& ctx,
                        const RunOverrides& ov) {
  EnvPath env = s.env.build_deterministic(s.horizon);
  std::vector<int> alpha = s.f_alpha;
  if (alpha.empty()) {
    alpha.assign(std::size_t(s.r), 0);
    alpha[0] = 2;
  }
  PolynomialTestFn f = PolynomialTestFn::monomial(s.r, alpha);
  std::vector<long long> n_list =
      s.n_list.empty() ? std::vector<long long>{s.population} : s.n_list;
  GapScan scan = generator_gap_scan(chain_model(s.model), env, f, n_list,
                                    s.horizon, s.grid_density);

  bool pass = true;
  for (std::size_t i = 1; i < scan.sup_gap.size(); ++i)
    if (scan.sup_gap[i] > scan.sup_gap[i - 1] + 1e-9) pass = false;

  json j;
  j["test"] = "generator_gap";
  j["model"] = to_string(s.model);
  j["f_alpha"] = alpha;
  j["N"] = scan.n_values;
  j["sup_gap"] = scan.sup_gap;
  j["gap_times_N"] = scan.gap_times_n;
  j["halving_ratio"] = scan.halving_ratio;
  j["pass"] = pass;
  ctx.write_json("generator_check.json", j);

  std::ofstream out = ctx.open("generator_check.csv");
  out << "N,sup_gap,gap_times_N\n";
  for (std::size_t i = 0; i < scan.n_values.size(); ++i)
    out << scan.n_values[i] << "," << fmt(scan.sup_gap[i]) << ","
        << fmt(scan.gap_times_n[i]) << "\n";
  if (ov.emit_plot_data) {
    std::ofstream plot = ctx.open("plot_generator_gap.dat");
    for (std::size_t i = 0; i < scan.n_values.size(); ++i)
      plot << scan.n_values[i] << " " << fmt(scan.sup_gap[i]) << "\n";
  }
  return pass ? 0 : 1;
}

int cmd_converge(const Scenario& s, const OutputContext& ctx,
                 const RunOverrides& ov) {
  EnvPath env = s.env.build_deterministic(s.horizon);
  if (chain_model(s.model) == Model::Mamwid) {
    if (s.n_list.size() < 3)
      throw ValidationError("N_list",
                            "converge needs at least 3 population sizes");
    ConvergenceReport rep =
        mamwid_convergence(env, initial_point(s), s.horizon, s.n_list,
                           s.replicates, s.seed, ov.threads, s.h);
    json j;
    j["test"] = "mamwid_convergence";
    j["N"] = rep.n_values;
    j["mean_sup_error"] = rep.mean_sup_error;
    j["std_sup_error"] = rep.std_sup_error;
    j["slope"] = rep.fit.slope;
    j["slope_ci"] = {rep.fit.ci_lo, rep.fit.ci_hi};
    j["errors_decreasing"] = rep.errors_decreasing;
    j["pass"] = rep.pass;
    ctx.write_json("converge.json", j);

    std::ofstream out = ctx.open("converge.csv");
    out << "N,mean_sup_error,std_sup_error\n";
    for (std::size_t i = 0; i < rep.n_values.size(); ++i)
      out << rep.n_values[i] << "," << fmt(rep.mean_sup_error[i]) << ","
          << fmt(rep.std_sup_error[i]) << "\n";
    if (ov.emit_plot_data) {
      std::ofstream plot = ctx.open("plot_converge.dat");
      for (std::size_t i = 0; i < rep.n_values.size(); ++i)
        plot << rep.n_values[i] << " " << fmt(rep.mean_sup_error[i]) << "\n";
    }
    return rep.pass ? 0 : 1;
  }

  MomentTestReport rep = mamwidams_moment_test(
      env, initial_point(s), s.horizon, s.population, s.replicates, s.n_max,
      s.seed, ov.threads, s.h);
  json j;
  j["test"] = "mamwidams_moments";
  j["N"] = rep.population;
  j["replicates"] = rep.replicates;
  j["n_max"] = rep.n_max;
  j["checkpoints"] = rep.checkpoints;
  j["max_abs_z"] = rep.max_abs_z;
  j["pass"] = rep.pass;
  ctx.write_json("converge.json", j);

  std::ofstream out = ctx.open("converge.csv");
  out << "t,alpha,empirical,exact,z\n";
  for (const auto& c : rep.checks)
    out << fmt(c.t) << "," << alpha_key(c.alpha) << "," << fmt(c.empirical)
        << "," << fmt(c.exact) << "," << fmt(c.z) << "\n";
  return rep.pass ? 0 : 1;
}

int cmd_annealed(const Scenario& s, const OutputContext& ctx,
                 const RunOverrides& ov) {
  RandomEnvSpec spec = s.env.build_random();
  AnnealedReport rep = quenched_annealed_test(
      spec, chain_model(s.model), initial_point(s), s.horizon, s.population,
      s.m_env, s.m_chain, s.seed, ov.threads);
  json j;
  j["test"] = "quenched_annealed";
  j["model"] = to_string(s.model);
  j["N"] = rep.population;
  j["m_env"] = rep.m_env;
  j["m_chain"] = rep.m_chain;
  j["checkpoints"] = rep.checkpoints;
  j["ks_stat"] = rep.ks_stat;
  j["ks_p"] = rep.ks_p;
  j["limit_ks_stat"] = rep.limit_ks_stat;
  j["level"] = rep.level;
  j["tests"] = rep.tests;
  j["min_p"] = rep.min_p;
  j["pass"] = rep.ks_pass;
  ctx.write_json("annealed.json", j);

  std::ofstream out = ctx.open("annealed_samples.csv");
  out << "checkpoint,coordinate,sample,value\n";
  for (std::size_t c = 0; c < rep.checkpoints.size(); ++c)
    for (int i = 0; i < s.r; ++i) {
      for (double v : rep.annealed_samples[c][std::size_t(i)])
        out << fmt(rep.checkpoints[c]) << "," << (i + 1) << ",annealed,"
            << fmt(v) << "\n";
      for (double v : rep.mixture_samples[c][std::size_t(i)])
        out << fmt(rep.checkpoints[c]) << "," << (i + 1) << ",mixture,"
            << fmt(v) << "\n";
    }
  return rep.ks_pass ? 0 : 1;
}

}  // namespace

int run_command(const std::string& subcommand, Scenario s,
                const RunOverrides& ov) {
  if (ov.population) s.population = *ov.population;
  if (ov.horizon) s.horizon = *ov.horizon;
  if (ov.replicates) s.replicates = *ov.replicates;
  if (ov.seed) s.seed = *ov.seed;
  if (ov.out_dir) s.out_dir = *ov.out_dir;
  validate_scenario(s);

  // subcommand/environment compatibility is config-level: check before
  // any output file is created
  bool needs_random = subcommand == "annealed";
  bool needs_deterministic = subcommand == "limit-ode" ||
                             subcommand == "diffuse" ||
                             subcommand == "moments" ||
                             subcommand == "generator-check" ||
                             subcommand == "converge";
  if (!needs_random && !needs_deterministic && subcommand != "simulate")
    throw ValidationError("subcommand",
                          "unknown subcommand '" + subcommand + "'");
  if (needs_random && !random_model(s.model))
    throw ValidationError("model", "'" + subcommand +
                                       "' needs a random-environment model");
  if (needs_deterministic && random_model(s.model))
    throw ValidationError("model", "'" + subcommand +
                                       "' needs a deterministic environment");

  OutputContext ctx{fs::path(s.out_dir), scenario_hash(s), s.seed};
  fs::create_directories(ctx.dir);

  if (subcommand == "simulate") return cmd_simulate(s, ctx, ov);
  if (subcommand == "limit-ode") return cmd_limit_ode(s, ctx, ov);
  if (subcommand == "diffuse") return cmd_diffuse(s, ctx, ov);
  if (subcommand == "moments") return cmd_moments(s, ctx, ov);
  if (subcommand == "generator-check") return cmd_generator_check(s, ctx, ov);
  if (subcommand == "converge") return cmd_converge(s, ctx, ov);
  return cmd_annealed(s, ctx, ov);
}

}  // namespace typeflow
