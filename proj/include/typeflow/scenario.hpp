#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "typeflow/environment.hpp"
#include "typeflow/simplex_core.hpp"

namespace typeflow {

enum class ScenarioModel { Mamwid, Mamwidams, Mamwidare, Mamwidmsare };

std::string to_string(ScenarioModel m);
ScenarioModel scenario_model_from_string(const std::string& s);

/// Environment section of a scenario file. Deterministic kinds build an
/// EnvPath directly; random kinds build a RandomEnvSpec sampled per run.
struct EnvConfig {
  enum class Kind { Constant, Piecewise, Sinusoid, MarkovSwitch, Ar1Fundamentals };
  Kind kind = Kind::Constant;

  Eigen::MatrixXd matrix;  // constant

  std::vector<double> breakpoints;  // piecewise, interior times
  std::vector<Eigen::MatrixXd> matrices;

  Eigen::MatrixXd base, amplitude;  // sinusoid
  double omega = 1.0;
  double phase = 0.0;

  std::vector<Eigen::MatrixXd> states;  // markov_switch
  Eigen::MatrixXd intensity;
  Eigen::VectorXd init_probs;

  double phi = 0.9;  // ar1_fundamentals
  double sigma = 0.1;
  double h0 = 0.0;
  long long density = 16;
  Eigen::MatrixXd offsets, weights;

  bool random() const {
    return kind == Kind::MarkovSwitch || kind == Kind::Ar1Fundamentals;
  }
  EnvPath build_deterministic(double horizon) const;
  RandomEnvSpec build_random() const;
  double min_population() const;
};

struct InitialConfig {
  enum class Kind { Point, Dirichlet, Counts };
  Kind kind = Kind::Point;
  Eigen::VectorXd x0;
  Eigen::VectorXd alpha;
  VecI counts;
};

struct Scenario {
  std::string name = "scenario";
  int r = 2;
  ScenarioModel model = ScenarioModel::Mamwid;
  EnvConfig env;
  InitialConfig initial;
  long long population = 100;
  std::vector<long long> n_list;
  double horizon = 1.0;
  int replicates = 1;
  int n_max = 4;
  double h = 1e-3;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int m_env = 200;
  int m_chain = 50;
  int grid_density = 16;
  std::vector<int> f_alpha;  // generator-check monomial; default x1^2

  bool operator==(const Scenario& other) const;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& s);
void validate_scenario(const Scenario& s);
std::uint64_t scenario_hash(const Scenario& s);

}  // namespace typeflow
