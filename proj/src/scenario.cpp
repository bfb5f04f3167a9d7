#include "typeflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace typeflow {

std::string to_string(ScenarioModel m) {
  switch (m) {
    case ScenarioModel::Mamwid: return "mamwid";
    case ScenarioModel::Mamwidams: return "mamwidams";
    case ScenarioModel::Mamwidare: return "mamwidare";
    case ScenarioModel::Mamwidmsare: return "mamwidmsare";
  }
  throw Error("unreachable");
}

ScenarioModel scenario_model_from_string(const std::string& s) {
  if (s == "mamwid") return ScenarioModel::Mamwid;
  if (s == "mamwidams") return ScenarioModel::Mamwidams;
  if (s == "mamwidare") return ScenarioModel::Mamwidare;
  if (s == "mamwidmsare") return ScenarioModel::Mamwidmsare;
  throw ValidationError("model", "unknown model '" + s + "'");
}

EnvPath EnvConfig::build_deterministic(double horizon) const {
  switch (kind) {
    case Kind::Constant:
      return EnvPath::constant(validate_rate_matrix(matrix));
    case Kind::Piecewise: {
      std::vector<RateMatrix> vals;
      for (const auto& m : matrices) vals.push_back(validate_rate_matrix(m));
      return EnvPath::piecewise(breakpoints, std::move(vals), horizon);
    }
    case Kind::Sinusoid:
      return EnvPath::sinusoid(SinusoidRates{base, amplitude, omega, phase});
    default:
      throw ValidationError("environment",
                            "random environment where a deterministic path "
                            "is required");
  }
}

RandomEnvSpec EnvConfig::build_random() const {
  RandomEnvSpec spec;
  if (kind == Kind::MarkovSwitch) {
    MarkovSwitchSpec ms;
    for (const auto& m : states) ms.states.push_back(validate_rate_matrix(m));
    ms.intensity = intensity;
    ms.initial_law = init_probs;
    spec.law = std::move(ms);
  } else if (kind == Kind::Ar1Fundamentals) {
    Ar1FundamentalsSpec f;
    f.phi = phi;
    f.sigma = sigma;
    f.h0 = h0;
    f.density = density;
    f.offsets = offsets;
    f.weights = weights;
    spec.law = std::move(f);
  } else {
    throw ValidationError("environment",
                          "deterministic environment where a random law is "
                          "required");
  }
  spec.validate();
  return spec;
}

double EnvConfig::min_population() const {
  if (random()) return build_random().min_population_bound();
  switch (kind) {
    case Kind::Constant:
      return validate_rate_matrix(matrix).min_population();
    case Kind::Piecewise: {
      double worst = 0.0;
      for (const auto& m : matrices)
        worst = std::max(worst, validate_rate_matrix(m).min_population());
      return worst;
    }
    case Kind::Sinusoid:
      return EnvPath::sinusoid(SinusoidRates{base, amplitude, omega, phase})
          .min_population();
    default:
      throw Error("unreachable");
  }
}

// ---------------------------------------------------------------------
// parsing

namespace {

struct RawConfig {
  // section -> key -> (value text, line number)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> kv;

  bool has(const std::string& sec, const std::string& key) const {
    auto s = kv.find(sec);
    return s != kv.end() && s->second.count(key) > 0;
  }
  const std::pair<std::string, int>& get(const std::string& sec,
                                         const std::string& key) const {
    return kv.at(sec).at(key);
  }
};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError(lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError(lineno, "empty section name");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(lineno, "empty key");
    if (raw.kv[section].count(key))
      throw ParseError(lineno, "duplicate key '" + key + "'");
    raw.kv[section][key] = {value, lineno};
  }
  return raw;
}

double parse_double(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + text + "'");
  }
}

long long parse_int(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "expected an integer, got '" + text + "'");
  }
}

std::uint64_t parse_u64(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "expected an unsigned integer, got '" + text + "'");
  }
}

std::vector<double> parse_array(const std::string& text, int line) {
  std::string t = trim(text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    throw ParseError(line, "expected [a, b, ...], got '" + text + "'");
  t = t.substr(1, t.size() - 2);
  std::vector<double> out;
  std::string item;
  std::istringstream in(t);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double(item, line));
  }
  return out;
}

Eigen::MatrixXd parse_matrix(const std::string& text, int line, int r) {
  std::vector<double> flat = parse_array(text, line);
  if (int(flat.size()) != r * r)
    throw ParseError(line, "expected " + std::to_string(r * r) +
                               " row-major entries, got " +
                               std::to_string(flat.size()));
  Eigen::MatrixXd m(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) m(i, j) = flat[std::size_t(i * r + j)];
  return m;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  RawConfig raw = tokenize(text);
  Scenario s;

  auto top = [&](const std::string& key) { return raw.has("", key); };
  auto val = [&](const std::string& key) { return raw.get("", key); };

  if (top("name")) s.name = val("name").first;
  if (top("r")) s.r = int(parse_int(val("r").first, val("r").second));
  if (top("model"))
    s.model = scenario_model_from_string(val("model").first);
  if (!top("seed"))
    throw ValidationError("seed", "a master seed is mandatory");
  s.seed = parse_u64(val("seed").first, val("seed").second);
  if (top("N"))
    s.population = parse_int(val("N").first, val("N").second);
  if (top("N_list")) {
    for (double v : parse_array(val("N_list").first, val("N_list").second))
      s.n_list.push_back((long long)(std::llround(v)));
  }
  if (top("T")) s.horizon = parse_double(val("T").first, val("T").second);
  if (top("replicates"))
    s.replicates =
        int(parse_int(val("replicates").first, val("replicates").second));
  if (top("n_max"))
    s.n_max = int(parse_int(val("n_max").first, val("n_max").second));
  if (top("h")) s.h = parse_double(val("h").first, val("h").second);
  if (top("dt")) s.dt = parse_double(val("dt").first, val("dt").second);
  if (top("out")) s.out_dir = val("out").first;
  if (top("m_env"))
    s.m_env = int(parse_int(val("m_env").first, val("m_env").second));
  if (top("m_chain"))
    s.m_chain = int(parse_int(val("m_chain").first, val("m_chain").second));
  if (top("grid_density"))
    s.grid_density = int(
        parse_int(val("grid_density").first, val("grid_density").second));
  if (top("f_alpha")) {
    for (double v : parse_array(val("f_alpha").first, val("f_alpha").second))
      s.f_alpha.push_back(int(std::llround(v)));
  }

  if (raw.kv.count("environment")) {
    auto sec = [&](const std::string& key) { return raw.has("environment", key); };
    auto sv = [&](const std::string& key) { return raw.get("environment", key); };
    std::string kind = sec("kind") ? sv("kind").first : "constant";
    if (kind == "constant") {
      s.env.kind = EnvConfig::Kind::Constant;
      if (!sec("matrix"))
        throw ValidationError("environment.matrix", "missing");
      s.env.matrix = parse_matrix(sv("matrix").first, sv("matrix").second, s.r);
    } else if (kind == "piecewise") {
      s.env.kind = EnvConfig::Kind::Piecewise;
      if (sec("breakpoints")) {
        s.env.breakpoints =
            parse_array(sv("breakpoints").first, sv("breakpoints").second);
      }
      for (std::size_t k = 0;; ++k) {
        std::string key = "matrix_" + std::to_string(k);
        if (!sec(key)) break;
        s.env.matrices.push_back(
            parse_matrix(sv(key).first, sv(key).second, s.r));
      }
      if (s.env.matrices.empty())
        throw ValidationError("environment", "piecewise needs matrix_0, ...");
    } else if (kind == "sinusoid") {
      s.env.kind = EnvConfig::Kind::Sinusoid;
      if (!sec("base")) throw ValidationError("environment.base", "missing");
      s.env.base = parse_matrix(sv("base").first, sv("base").second, s.r);
      s.env.amplitude = sec("amplitude")
                            ? parse_matrix(sv("amplitude").first,
                                           sv("amplitude").second, s.r)
                            : Eigen::MatrixXd::Zero(s.r, s.r);
      if (sec("omega"))
        s.env.omega = parse_double(sv("omega").first, sv("omega").second);
      if (sec("phase"))
        s.env.phase = parse_double(sv("phase").first, sv("phase").second);
    } else if (kind == "markov_switch") {
      s.env.kind = EnvConfig::Kind::MarkovSwitch;
      for (std::size_t k = 0;; ++k) {
        std::string key = "state_" + std::to_string(k);
        if (!sec(key)) break;
        s.env.states.push_back(
            parse_matrix(sv(key).first, sv(key).second, s.r));
      }
      if (s.env.states.empty())
        throw ValidationError("environment", "markov_switch needs state_0, ...");
      int m = int(s.env.states.size());
      if (sec("intensity")) {
        std::vector<double> flat =
            parse_array(sv("intensity").first, sv("intensity").second);
        if (int(flat.size()) != m * m)
          throw ValidationError("environment.intensity",
                                "needs " + std::to_string(m * m) + " entries");
        s.env.intensity = Eigen::MatrixXd(m, m);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            s.env.intensity(i, j) = flat[std::size_t(i * m + j)];
      } else {
        s.env.intensity = Eigen::MatrixXd::Zero(m, m);
      }
      if (sec("init_probs")) {
        std::vector<double> flat =
            parse_array(sv("init_probs").first, sv("init_probs").second);
        s.env.init_probs =
            Eigen::Map<Eigen::VectorXd>(flat.data(), long(flat.size()));
      } else {
        s.env.init_probs = Eigen::VectorXd::Constant(m, 1.0 / double(m));
      }
    } else if (kind == "ar1_fundamentals") {
      s.env.kind = EnvConfig::Kind::Ar1Fundamentals;
      if (sec("phi"))
        s.env.phi = parse_double(sv("phi").first, sv("phi").second);
      if (sec("sigma"))
        s.env.sigma = parse_double(sv("sigma").first, sv("sigma").second);
      if (sec("h0")) s.env.h0 = parse_double(sv("h0").first, sv("h0").second);
      if (sec("density"))
        s.env.density = parse_int(sv("density").first, sv("density").second);
      if (!sec("offsets"))
        throw ValidationError("environment.offsets", "missing");
      s.env.offsets =
          parse_matrix(sv("offsets").first, sv("offsets").second, s.r);
      s.env.weights = sec("weights")
                          ? parse_matrix(sv("weights").first,
                                         sv("weights").second, s.r)
                          : Eigen::MatrixXd::Zero(s.r, s.r);
    } else {
      throw ValidationError("environment.kind", "unknown kind '" + kind + "'");
    }
  } else {
    throw ValidationError("environment", "missing [environment] section");
  }

  if (raw.kv.count("initial")) {
    auto sec = [&](const std::string& key) { return raw.has("initial", key); };
    auto sv = [&](const std::string& key) { return raw.get("initial", key); };
    std::string kind = sec("kind") ? sv("kind").first : "point";
    if (kind == "point") {
      s.initial.kind = InitialConfig::Kind::Point;
      if (!sec("x0")) throw ValidationError("initial.x0", "missing");
      std::vector<double> flat = parse_array(sv("x0").first, sv("x0").second);
      s.initial.x0 =
          Eigen::Map<Eigen::VectorXd>(flat.data(), long(flat.size()));
    } else if (kind == "dirichlet") {
      s.initial.kind = InitialConfig::Kind::Dirichlet;
      if (!sec("alpha")) throw ValidationError("initial.alpha", "missing");
      std::vector<double> flat =
          parse_array(sv("alpha").first, sv("alpha").second);
      s.initial.alpha =
          Eigen::Map<Eigen::VectorXd>(flat.data(), long(flat.size()));
    } else if (kind == "counts") {
      s.initial.kind = InitialConfig::Kind::Counts;
      if (!sec("counts")) throw ValidationError("initial.counts", "missing");
      std::vector<double> flat =
          parse_array(sv("counts").first, sv("counts").second);
      s.initial.counts = VecI(long(flat.size()));
      for (std::size_t k = 0; k < flat.size(); ++k)
        s.initial.counts[long(k)] = (long long)(std::llround(flat[k]));
    } else {
      throw ValidationError("initial.kind", "unknown kind '" + kind + "'");
    }
  } else {
    s.initial.kind = InitialConfig::Kind::Point;
    s.initial.x0 = Eigen::VectorXd::Constant(s.r, 1.0 / double(s.r));
  }

  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("scenario", "cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

// ---------------------------------------------------------------------
// validation

void validate_scenario(const Scenario& s) {
  if (s.r < 2) throw ValidationError("r", "need at least 2 types");
  if (s.horizon <= 0.0) throw ValidationError("T", "must be positive");
  if (s.replicates < 1) throw ValidationError("replicates", "must be >= 1");
  if (s.n_max < 1 || s.n_max > 6)
    throw ValidationError("n_max", "must be between 1 and 6");
  if (s.h <= 0.0) throw ValidationError("h", "must be positive");
  if (s.dt <= 0.0) throw ValidationError("dt", "must be positive");
  if (s.m_env < 1 || s.m_chain < 1)
    throw ValidationError("m_env", "annealed ensemble sizes must be >= 1");
  if (s.grid_density < 1)
    throw ValidationError("grid_density", "must be >= 1");

  bool random_model = s.model == ScenarioModel::Mamwidare ||
                      s.model == ScenarioModel::Mamwidmsare;
  if (random_model != s.env.random())
    throw ValidationError(
        "model", random_model
                     ? "random-environment model needs a random environment"
                     : "deterministic model needs a deterministic environment");

  double n_min = s.env.min_population();
  if (s.population < 2)
    throw ValidationError("N", "population must be >= 2");
  if (double(s.population) < n_min)
    throw ValidationError("N", "population too small for stochastic P (need >= " +
                                   std::to_string(n_min) + ")");
  for (long long n : s.n_list) {
    if (n < 2 || double(n) < n_min)
      throw ValidationError("N_list", "entry " + std::to_string(n) +
                                          " below the admissible minimum");
  }

  switch (s.initial.kind) {
    case InitialConfig::Kind::Point: {
      if (int(s.initial.x0.size()) != s.r)
        throw ValidationError("initial.x0", "length must equal r");
      SimplexPoint check(s.initial.x0);
      break;
    }
    case InitialConfig::Kind::Dirichlet:
      if (int(s.initial.alpha.size()) != s.r)
        throw ValidationError("initial.alpha", "length must equal r");
      if (s.initial.alpha.minCoeff() <= 0.0)
        throw ValidationError("initial.alpha", "parameters must be positive");
      break;
    case InitialConfig::Kind::Counts: {
      if (int(s.initial.counts.size()) != s.r)
        throw ValidationError("initial.counts", "length must equal r");
      TypeCounts check(s.initial.counts, s.population);
      break;
    }
  }

  if (!s.f_alpha.empty()) {
    if (int(s.f_alpha.size()) != s.r)
      throw ValidationError("f_alpha", "length must equal r");
    int deg = 0;
    for (int e : s.f_alpha) {
      if (e < 0) throw ValidationError("f_alpha", "negative exponent");
      deg += e;
    }
    if (deg > 4) throw ValidationError("f_alpha", "degree cap is 4");
  }

  // environment structural checks
  if (s.env.random()) {
    s.env.build_random();
  } else {
    s.env.build_deterministic(s.horizon);
  }
}

// ---------------------------------------------------------------------
// serialization

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_array(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out + "]";
}

std::string fmt_matrix(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return fmt_array(flat);
}

}  // namespace

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream out;
  out << "name = " << s.name << "\n";
  out << "model = " << to_string(s.model) << "\n";
  out << "r = " << s.r << "\n";
  out << "seed = " << s.seed << "\n";
  out << "N = " << s.population << "\n";
  if (!s.n_list.empty()) {
    std::vector<double> nv(s.n_list.begin(), s.n_list.end());
    out << "N_list = " << fmt_array(nv) << "\n";
  }
  out << "T = " << fmt(s.horizon) << "\n";
  out << "replicates = " << s.replicates << "\n";
  out << "n_max = " << s.n_max << "\n";
  out << "h = " << fmt(s.h) << "\n";
  out << "dt = " << fmt(s.dt) << "\n";
  out << "out = " << s.out_dir << "\n";
  out << "m_env = " << s.m_env << "\n";
  out << "m_chain = " << s.m_chain << "\n";
  out << "grid_density = " << s.grid_density << "\n";
  if (!s.f_alpha.empty()) {
    std::vector<double> fv(s.f_alpha.begin(), s.f_alpha.end());
    out << "f_alpha = " << fmt_array(fv) << "\n";
  }

  out << "\n[environment]\n";
  switch (s.env.kind) {
    case EnvConfig::Kind::Constant:
      out << "kind = constant\n";
      out << "matrix = " << fmt_matrix(s.env.matrix) << "\n";
      break;
    case EnvConfig::Kind::Piecewise:
      out << "kind = piecewise\n";
      if (!s.env.breakpoints.empty())
        out << "breakpoints = " << fmt_array(s.env.breakpoints) << "\n";
      for (std::size_t k = 0; k < s.env.matrices.size(); ++k)
        out << "matrix_" << k << " = " << fmt_matrix(s.env.matrices[k]) << "\n";
      break;
    case EnvConfig::Kind::Sinusoid:
      out << "kind = sinusoid\n";
      out << "base = " << fmt_matrix(s.env.base) << "\n";
      out << "amplitude = " << fmt_matrix(s.env.amplitude) << "\n";
      out << "omega = " << fmt(s.env.omega) << "\n";
      out << "phase = " << fmt(s.env.phase) << "\n";
      break;
    case EnvConfig::Kind::MarkovSwitch: {
      out << "kind = markov_switch\n";
      for (std::size_t k = 0; k < s.env.states.size(); ++k)
        out << "state_" << k << " = " << fmt_matrix(s.env.states[k]) << "\n";
      out << "intensity = " << fmt_matrix(s.env.intensity) << "\n";
      std::vector<double> probs(s.env.init_probs.data(),
                                s.env.init_probs.data() +
                                    s.env.init_probs.size());
      out << "init_probs = " << fmt_array(probs) << "\n";
      break;
    }
    case EnvConfig::Kind::Ar1Fundamentals:
      out << "kind = ar1_fundamentals\n";
      out << "phi = " << fmt(s.env.phi) << "\n";
      out << "sigma = " << fmt(s.env.sigma) << "\n";
      out << "h0 = " << fmt(s.env.h0) << "\n";
      out << "density = " << s.env.density << "\n";
      out << "offsets = " << fmt_matrix(s.env.offsets) << "\n";
      out << "weights = " << fmt_matrix(s.env.weights) << "\n";
      break;
  }

  out << "\n[initial]\n";
  switch (s.initial.kind) {
    case InitialConfig::Kind::Point: {
      out << "kind = point\n";
      std::vector<double> x(s.initial.x0.data(),
                            s.initial.x0.data() + s.initial.x0.size());
      out << "x0 = " << fmt_array(x) << "\n";
      break;
    }
    case InitialConfig::Kind::Dirichlet: {
      out << "kind = dirichlet\n";
      std::vector<double> a(s.initial.alpha.data(),
                            s.initial.alpha.data() + s.initial.alpha.size());
      out << "alpha = " << fmt_array(a) << "\n";
      break;
    }
    case InitialConfig::Kind::Counts: {
      out << "kind = counts\n";
      std::vector<double> c;
      for (int i = 0; i < s.initial.counts.size(); ++i)
        c.push_back(double(s.initial.counts[i]));
      out << "counts = " << fmt_array(c) << "\n";
      break;
    }
  }
  return out.str();
}

bool Scenario::operator==(const Scenario& other) const {
  return serialize_scenario(*this) == serialize_scenario(other);
}

std::uint64_t scenario_hash(const Scenario& s) {
  // identifies what was run, not where the artifacts land
  Scenario canonical = s;
  canonical.out_dir = "out";
  std::string text = serialize_scenario(canonical);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace typeflow
