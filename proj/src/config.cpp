#include "tsonn/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace tsonn {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool is_bare_key(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

bool parse_number(const std::string& s, ConfigValue& out) {
  std::string t;
  for (char c : s)
    if (c != '_') t.push_back(c);
  if (t.empty()) return false;
  const bool looks_float = t.find_first_of(".eE") != std::string::npos || t == "inf" ||
                           t == "+inf" || t == "-inf";
  if (!looks_float) {
    long long v = 0;
    const char* b = t.data() + (t[0] == '+' ? 1 : 0);
    auto [p, ec] = std::from_chars(b, t.data() + t.size(), v);
    if (ec == std::errc() && p == t.data() + t.size()) {
      out = v;
      return true;
    }
    return false;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) return false;
    out = v;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

ConfigValue parse_value(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError(where + ": missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError(where + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char e = s[++i];
        if (e == 'n') out.push_back('\n');
        else if (e == 't') out.push_back('\t');
        else if (e == '"' || e == '\\') out.push_back(e);
        else throw ConfigError(where + ": unsupported escape \\" + std::string(1, e));
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError(where + ": unterminated array");
    std::vector<double> arr;
    std::stringstream body(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(body, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) continue;
      ConfigValue v;
      if (!parse_number(t, v)) throw ConfigError(where + ": arrays may only hold numbers");
      arr.push_back(std::holds_alternative<long long>(v) ? double(std::get<long long>(v))
                                                         : std::get<double>(v));
    }
    return arr;
  }
  ConfigValue v;
  if (!parse_number(s, v)) throw ConfigError(where + ": cannot parse value '" + s + "'");
  return v;
}

std::string describe(const ConfigValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using X = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<X, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<X, std::string>) return "\"" + x + "\"";
        else if constexpr (std::is_same_v<X, std::vector<double>>) return "array";
        else return std::to_string(x);
      },
      v);
}

double as_double(const ConfigValue& v, const std::string& key) {
  if (auto p = std::get_if<double>(&v)) return *p;
  if (auto p = std::get_if<long long>(&v)) return double(*p);
  throw ConfigError(key + ": expected a number, got " + describe(v));
}

long long as_int(const ConfigValue& v, const std::string& key) {
  if (auto p = std::get_if<long long>(&v)) return *p;
  if (auto p = std::get_if<double>(&v); p && *p == std::floor(*p) && std::abs(*p) < 9e15)
    return (long long)*p;
  throw ConfigError(key + ": expected an integer, got " + describe(v));
}

bool as_bool(const ConfigValue& v, const std::string& key) {
  if (auto p = std::get_if<bool>(&v)) return *p;
  throw ConfigError(key + ": expected true or false, got " + describe(v));
}

std::string as_string(const ConfigValue& v, const std::string& key) {
  if (auto p = std::get_if<std::string>(&v)) return *p;
  throw ConfigError(key + ": expected a string, got " + describe(v));
}

std::array<Index, 2> as_pair(const ConfigValue& v, const std::string& key) {
  if (auto p = std::get_if<std::vector<double>>(&v)) {
    if (p->size() == 1) return {Index((*p)[0]), 0};
    if (p->size() == 2) return {Index((*p)[0]), Index((*p)[1])};
  }
  if (std::holds_alternative<long long>(v)) return {Index(as_int(v, key)), 0};
  throw ConfigError(key + ": expected [a, b]");
}

using Setter = std::function<void(RunConfig&, const ConfigValue&, const std::string&)>;

template <typename F>
Setter number(F f) {
  return [f](RunConfig& c, const ConfigValue& v, const std::string& k) { f(c, as_double(v, k)); };
}
template <typename F>
Setter integer(F f) {
  return [f](RunConfig& c, const ConfigValue& v, const std::string& k) { f(c, as_int(v, k)); };
}
template <typename F>
Setter boolean(F f) {
  return [f](RunConfig& c, const ConfigValue& v, const std::string& k) { f(c, as_bool(v, k)); };
}
template <typename F>
Setter text(F f) {
  return [f](RunConfig& c, const ConfigValue& v, const std::string& k) { f(c, as_string(v, k)); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"name", text([](RunConfig& c, std::string s) { c.name = s; })},
      {"out", text([](RunConfig& c, std::string s) { c.out_dir = s; })},
      {"precision", text([](RunConfig& c, std::string s) {
         if (s != "f64" && s != "f32") throw ConfigError("precision: expected \"f64\" or \"f32\"");
         c.precision = s;
       })},
      {"reference", text([](RunConfig& c, std::string s) { c.reference = s; })},

      {"problem.id", text([](RunConfig&, std::string) {})},  // consumed before defaults
      {"problem.v_inf", number([](RunConfig& c, double x) { c.problem.v_inf = x; })},
      {"problem.r_wall", number([](RunConfig& c, double x) { c.problem.r_wall = x; })},
      {"problem.r_far", number([](RunConfig& c, double x) { c.problem.r_far = x; })},
      {"problem.nu", number([](RunConfig& c, double x) { c.problem.nu = x; })},
      {"problem.reynolds", number([](RunConfig& c, double x) { c.problem.reynolds = x; })},
      {"problem.beta", number([](RunConfig& c, double x) { c.problem.beta = x; })},
      {"problem.ac_diffusivity",
       number([](RunConfig& c, double x) { c.problem.ac_diffusivity = x; })},
      {"problem.ac_reaction", number([](RunConfig& c, double x) { c.problem.ac_reaction = x; })},
      {"problem.lambda_bc", number([](RunConfig& c, double x) { c.problem.lambda_bc = x; })},
      {"problem.lambda_ic", number([](RunConfig& c, double x) { c.problem.lambda_ic = x; })},
      {"problem.sampling",
       text([](RunConfig& c, std::string s) { c.sampling = parse_sampling(s); })},
      {"problem.interior_points",
       integer([](RunConfig& c, long long n) { c.counts.interior = Index(n); })},
      {"problem.boundary_points",
       integer([](RunConfig& c, long long n) { c.counts.boundary = Index(n); })},
      {"problem.initial_points",
       integer([](RunConfig& c, long long n) { c.counts.initial = Index(n); })},
      {"problem.mesh", [](RunConfig& c, const ConfigValue& v, const std::string& k) {
         c.counts.mesh = as_pair(v, k);
         if (c.counts.mesh[1] > 0) c.counts.interior = c.counts.mesh[0] * c.counts.mesh[1];
       }},

      {"network.hidden_layers",
       integer([](RunConfig& c, long long n) { c.network.hidden_layers = int(n); })},
      {"network.hidden_width",
       integer([](RunConfig& c, long long n) { c.network.hidden_width = int(n); })},

      {"train.mode", text([](RunConfig& c, std::string s) { c.train.mode = parse_mode(s); })},
      {"train.dtau", number([](RunConfig& c, double x) { c.train.dtau = x; })},
      {"train.K", integer([](RunConfig& c, long long n) { c.train.inner = int(n); })},
      {"train.N", integer([](RunConfig& c, long long n) { c.train.outer = int(n); })},
      {"train.seed",
       integer([](RunConfig& c, long long n) { c.train.seed = std::uint64_t(n); })},
      {"train.resample", boolean([](RunConfig& c, bool b) { c.train.resample_on_outer = b; })},
      {"train.reset", boolean([](RunConfig& c, bool b) { c.train.reset_on_outer = b; })},
      {"train.divergence_factor",
       number([](RunConfig& c, double x) { c.train.divergence_factor = x; })},
      {"train.history_every",
       integer([](RunConfig& c, long long n) { c.train.history_every = int(n); })},

      {"optim.method",
       text([](RunConfig& c, std::string s) { c.train.optimizer = parse_optimizer(s); })},
      {"optim.lr", number([](RunConfig& c, double x) { c.train.adam.lr = x; c.train.sgd_lr = x; })},
      {"optim.beta1", number([](RunConfig& c, double x) { c.train.adam.beta1 = x; })},
      {"optim.beta2", number([](RunConfig& c, double x) { c.train.adam.beta2 = x; })},
      {"optim.eps", number([](RunConfig& c, double x) { c.train.adam.eps = x; })},
      {"optim.memory", integer([](RunConfig& c, long long n) { c.train.lbfgs.memory = int(n); })},
      {"optim.c1", number([](RunConfig& c, double x) { c.train.lbfgs.c1 = x; })},
      {"optim.c2", number([](RunConfig& c, double x) { c.train.lbfgs.c2 = x; })},
      {"optim.max_trials",
       integer([](RunConfig& c, long long n) { c.train.lbfgs.max_trials = int(n); })},

      {"oracle.eval_grid", [](RunConfig& c, const ConfigValue& v, const std::string& k) {
         c.grid.dims = as_pair(v, k);
       }},
      {"oracle.n", integer([](RunConfig& c, long long n) { c.grid.oracle_n = Index(n); })},
      {"oracle.steps_per_unit",
       integer([](RunConfig& c, long long n) { c.grid.oracle_steps_per_unit = Index(n); })},
  };
  return table;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> a = {
      {"mode", "train.mode"}, {"dtau", "train.dtau"}, {"K", "train.K"},
      {"N", "train.N"},       {"seed", "train.seed"}, {"optimizer", "optim.method"},
  };
  return a;
}

void apply_entry(RunConfig& cfg, const std::string& key, const ConfigValue& v) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second(cfg, v, key);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  std::string s = os.str();
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

void RunConfig::validate() const {
  problem.validate();
  network.validate();
  train.validate();
  if (network.input_dim != problem.input_dim() || network.output_dim != problem.state_dim())
    throw ConfigError("network input/output dimensions do not match the problem");
  if (counts.interior <= 0) throw ConfigError("problem.interior_points must be > 0");
  if (reference != "analytic" && reference != "oracle" && reference != "none" &&
      reference.rfind("file:", 0) != 0)
    throw ConfigError("reference: expected analytic, oracle, none or file:PATH");
  if (reference == "analytic" && (problem.id == ProblemId::cavity ||
                                  problem.id == ProblemId::allen_cahn))
    throw ConfigError("reference: " + to_string(problem.id) + " has no analytic solution");
}

RunConfig default_config(ProblemId id, bool desk) {
  RunConfig c;
  c.problem = make_problem(id);
  c.desk_scale = desk;
  c.name = to_string(id);
  c.network.input_dim = c.problem.input_dim();
  c.network.output_dim = c.problem.state_dim();
  c.grid = default_grid(c.problem, desk);
  c.train.mode = Mode::itsonn;
  c.train.seed = 1234;
  switch (id) {
    case ProblemId::laplace_cylinder:
      c.network.hidden_layers = desk ? 4 : 5;
      c.network.hidden_width = desk ? 64 : 128;
      c.sampling = SamplingStrategy::mesh;
      c.counts.mesh = desk ? std::array<Index, 2>{100, 50} : std::array<Index, 2>{200, 100};
      c.counts.interior = c.counts.mesh[0] * c.counts.mesh[1];
      c.counts.boundary = 2 * c.counts.mesh[0];
      c.train.dtau = 1.0;
      c.train.inner = 50;
      c.train.outer = desk ? 400 : 1000;
      c.reference = "analytic";
      break;
    case ProblemId::burgers_steady:
      c.network.hidden_layers = 3;
      c.network.hidden_width = 10;
      c.sampling = SamplingStrategy::mesh;
      c.counts.interior = 500;
      c.counts.boundary = 2;
      c.train.dtau = 0.1;
      c.train.inner = 100;
      c.train.outer = desk ? 100 : 500;
      c.reference = "analytic";
      break;
    case ProblemId::cavity:
      c.network.hidden_layers = desk ? 4 : 5;
      c.network.hidden_width = desk ? 32 : 128;
      c.sampling = SamplingStrategy::uniform_random;
      c.counts.interior = desk ? 5000 : 20000;
      c.counts.boundary = desk ? 400 : 2000;
      c.train.dtau = 0.5;
      c.train.inner = 300;
      c.train.outer = desk ? 40 : 300;
      c.train.optimizer = OptimizerKind::lbfgs;
      c.train.resample_on_outer = true;
      c.reference = "oracle";
      break;
    case ProblemId::allen_cahn:
      c.network.hidden_layers = 4;
      c.network.hidden_width = desk ? 64 : 128;
      c.sampling = SamplingStrategy::uniform_random;
      c.counts.interior = desk ? 5000 : 20000;
      c.counts.initial = 257;
      c.counts.boundary = 202;
      c.train.dtau = 0.3;
      c.train.inner = 300;
      c.train.outer = desk ? 60 : 100;
      c.train.optimizer = OptimizerKind::lbfgs;
      c.train.resample_on_outer = true;
      c.reference = "oracle";
      break;
  }
  c.out_dir = std::filesystem::path("runs") / c.name;
  return c;
}

ConfigEntries parse_config_text(const std::string& text, const std::string& origin) {
  ConfigEntries out;
  std::set<std::string> seen, tables;
  std::string table;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3 || s[1] == '[')
        throw ConfigError(where + ": malformed table header");
      table = trim(s.substr(1, s.size() - 2));
      if (!is_bare_key(table)) throw ConfigError(where + ": invalid table name '" + table + "'");
      if (!tables.insert(table).second)
        throw ConfigError(where + ": table [" + table + "] defined twice");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!is_bare_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    const std::string full = table.empty() ? key : table + "." + key;
    if (!seen.insert(full).second) throw ConfigError(where + ": duplicate key '" + full + "'");
    out.emplace_back(full, parse_value(s.substr(eq + 1), where + " (" + full + ")"));
  }
  return out;
}

RunConfig config_from_text(const std::string& text, bool desk_scale, const std::string& origin) {
  const ConfigEntries entries = parse_config_text(text, origin);
  // Reject unknown keys before anything else so misspellings are reported
  // even when the problem id is missing.
  for (const auto& [k, v] : entries)
    if (!setters().count(k)) throw ConfigError("unknown config key '" + k + "' in " + origin);
  auto id_it = std::find_if(entries.begin(), entries.end(),
                            [](const auto& e) { return e.first == "problem.id"; });
  if (id_it == entries.end()) throw ConfigError(origin + ": missing problem.id");
  ProblemId id;
  try {
    id = parse_problem_id(as_string(id_it->second, "problem.id"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem.id: ") + e.what());
  }
  RunConfig cfg = default_config(id, desk_scale);
  bool out_given = false;
  for (const auto& [k, v] : entries) {
    apply_entry(cfg, k, v);
    out_given |= k == "out";
  }
  if (!out_given) cfg.out_dir = std::filesystem::path("runs") / cfg.name;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, bool desk_scale) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_text(ss.str(), desk_scale, path.string());
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  std::string k = key;
  if (auto it = aliases().find(k); it != aliases().end()) k = it->second;
  if (k == "problem.id") throw ConfigError("problem.id cannot be overridden");
  if (!setters().count(k)) throw ConfigError("unknown config key '" + key + "'");
  ConfigValue v;
  // Bare words are taken as strings so "--vary mode=pinn,itsonn" works.
  const std::string t = trim(value);
  if (!t.empty() && (t.front() == '"' || t.front() == '[' || t == "true" || t == "false" ||
                     parse_number(t, v)))
    v = parse_value(t, key);
  else
    v = t;
  apply_entry(cfg, k, v);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream o;
  auto q = [](const std::string& s) { return "\"" + s + "\""; };
  o << "name = " << q(c.name) << "\n";
  o << "out = " << q(c.out_dir.string()) << "\n";
  o << "precision = " << q(c.precision) << "\n";
  o << "reference = " << q(c.reference) << "\n";
  o << "\n[problem]\n";
  o << "id = " << q(to_string(c.problem.id)) << "\n";
  const ProblemSpec& p = c.problem;
  switch (p.id) {
    case ProblemId::laplace_cylinder:
      o << "v_inf = " << fmt(p.v_inf) << "\nr_wall = " << fmt(p.r_wall)
        << "\nr_far = " << fmt(p.r_far) << "\n";
      break;
    case ProblemId::burgers_steady: o << "nu = " << fmt(p.nu) << "\n"; break;
    case ProblemId::cavity:
      o << "reynolds = " << fmt(p.reynolds) << "\nbeta = " << fmt(p.beta) << "\n";
      break;
    case ProblemId::allen_cahn:
      o << "ac_diffusivity = " << fmt(p.ac_diffusivity)
        << "\nac_reaction = " << fmt(p.ac_reaction) << "\n";
      break;
  }
  o << "lambda_bc = " << fmt(p.lambda_bc) << "\nlambda_ic = " << fmt(p.lambda_ic) << "\n";
  o << "sampling = " << q(to_string(c.sampling)) << "\n";
  o << "interior_points = " << c.counts.interior << "\n";
  o << "boundary_points = " << c.counts.boundary << "\n";
  if (p.time_dependent()) o << "initial_points = " << c.counts.initial << "\n";
  if (c.counts.mesh[0] > 0)
    o << "mesh = [" << c.counts.mesh[0] << ", " << c.counts.mesh[1] << "]\n";
  o << "\n[network]\n";
  o << "hidden_layers = " << c.network.hidden_layers << "\n";
  o << "hidden_width = " << c.network.hidden_width << "\n";
  o << "\n[train]\n";
  o << "mode = " << q(to_string(c.train.mode)) << "\n";
  o << "dtau = " << fmt(c.train.dtau) << "\n";
  o << "K = " << c.train.inner << "\nN = " << c.train.outer << "\n";
  o << "seed = " << c.train.seed << "\n";
  o << "resample = " << (c.train.resample_on_outer ? "true" : "false") << "\n";
  if (c.train.reset_on_outer) o << "reset = " << (*c.train.reset_on_outer ? "true" : "false") << "\n";
  o << "divergence_factor = " << fmt(c.train.divergence_factor) << "\n";
  o << "history_every = " << c.train.history_every << "\n";
  o << "\n[optim]\n";
  o << "method = " << q(to_string(c.train.optimizer)) << "\n";
  switch (c.train.optimizer) {
    case OptimizerKind::adam:
      o << "lr = " << fmt(c.train.adam.lr) << "\nbeta1 = " << fmt(c.train.adam.beta1)
        << "\nbeta2 = " << fmt(c.train.adam.beta2) << "\neps = " << fmt(c.train.adam.eps) << "\n";
      break;
    case OptimizerKind::sgd: o << "lr = " << fmt(c.train.sgd_lr) << "\n"; break;
    case OptimizerKind::lbfgs:
      o << "memory = " << c.train.lbfgs.memory << "\nc1 = " << fmt(c.train.lbfgs.c1)
        << "\nc2 = " << fmt(c.train.lbfgs.c2) << "\nmax_trials = " << c.train.lbfgs.max_trials
        << "\n";
      break;
  }
  o << "\n[oracle]\n";
  o << "eval_grid = [" << c.grid.dims[0] << ", " << c.grid.dims[1] << "]\n";
  if (c.grid.oracle_n > 0) o << "n = " << c.grid.oracle_n << "\n";
  if (c.grid.oracle_steps_per_unit > 0)
    o << "steps_per_unit = " << c.grid.oracle_steps_per_unit << "\n";
  return o.str();
}

}  // namespace tsonn
