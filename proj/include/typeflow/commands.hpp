#pragma once

#include <optional>
#include <string>

#include "typeflow/scenario.hpp"

namespace typeflow {

struct RunOverrides {
  std::optional<long long> population;
  std::optional<double> horizon;
  std::optional<int> replicates;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 0;  // 0: machine parallelism
  bool emit_plot_data = false;
};

/// Execute a subcommand against a scenario. Returns 0 on success, 1 when a
/// statistical gate fails; configuration problems throw (ParseError /
/// ValidationError) before any artifact is written.
int run_command(const std::string& subcommand, Scenario scenario,
                const RunOverrides& overrides);

}  // namespace typeflow
