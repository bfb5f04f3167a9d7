#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "typeflow/commands.hpp"

namespace {

void add_common(CLI::App* cmd, std::string& scenario_path,
                typeflow::RunOverrides& ov,
                std::optional<long long>& n_opt, std::optional<double>& t_opt,
                std::optional<int>& m_opt, std::optional<std::uint64_t>& seed_opt,
                std::optional<std::string>& out_opt) {
  cmd->add_option("--scenario", scenario_path, "scenario config file")
      ->required();
  cmd->add_option("--seed", seed_opt, "override the master seed");
  cmd->add_option("--threads", ov.threads, "worker pool size (0 = machine)");
  cmd->add_option("--out", out_opt, "output directory");
  cmd->add_option("--N", n_opt, "override the population size");
  cmd->add_option("--T", t_opt, "override the horizon");
  cmd->add_option("--replicates", m_opt, "override the replicate count");
  cmd->add_flag("--emit-plot-data", ov.emit_plot_data,
                "write gnuplot-ready two-column files");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"typeflow: finite-population type dynamics and their limits"};
  app.require_subcommand(1);

  const std::vector<std::string> subcommands = {
      "simulate", "limit-ode", "diffuse",  "moments",
      "generator-check", "converge", "annealed"};
  const std::vector<std::string> descriptions = {
      "run chain replicates and write path CSVs",
      "solve the deterministic limit and write its path",
      "sample the limit diffusion and write path CSVs",
      "solve the moment hierarchy and write t,alpha,value rows",
      "scan the discrete-vs-limit generator gap over N",
      "chain-vs-limit convergence report (paths or moments)",
      "quenched/annealed comparison for random environments"};

  std::string scenario_path;
  typeflow::RunOverrides ov;
  std::optional<long long> n_opt;
  std::optional<double> t_opt;
  std::optional<int> m_opt;
  std::optional<std::uint64_t> seed_opt;
  std::optional<std::string> out_opt;

  for (std::size_t i = 0; i < subcommands.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(subcommands[i], descriptions[i]);
    add_common(cmd, scenario_path, ov, n_opt, t_opt, m_opt, seed_opt, out_opt);
  }

  CLI11_PARSE(app, argc, argv);

  std::string sub = app.get_subcommands().front()->get_name();
  ov.population = n_opt;
  ov.horizon = t_opt;
  ov.replicates = m_opt;
  ov.seed = seed_opt;
  ov.out_dir = out_opt;

  try {
    typeflow::Scenario scenario = typeflow::load_scenario(scenario_path);
    int code = typeflow::run_command(sub, scenario, ov);
    if (code != 0) {
      nlohmann::json err{{"error",
                          {{"type", "gate"},
                           {"message", "statistical gate failed; see the "
                                       "report in the output directory"}}}};
      std::cerr << err.dump() << "\n";
    }
    return code;
  } catch (const typeflow::ParseError& e) {
    nlohmann::json err{{"error", {{"type", "parse"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const typeflow::ValidationError& e) {
    nlohmann::json err{
        {"error", {{"type", "validation"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err{
        {"error", {{"type", "runtime"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
