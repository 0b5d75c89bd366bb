#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tsonn/network.hpp"
#include "tsonn/problems.hpp"
#include "tsonn/trainer.hpp"

namespace tsonn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything one run needs. Scale-dependent quantities (network size, point
// counts, iteration budget, grids) come from per-benchmark defaults that
// switch with desk_scale; a config file or override may pin any of them.
struct RunConfig {
  std::string name;
  std::filesystem::path out_dir;
  std::string precision = "f64";    // f64 | f32
  std::string reference = "analytic";  // analytic | oracle | none | file:PATH
  bool desk_scale = false;

  ProblemSpec problem;
  NetworkShape network;
  SamplingStrategy sampling = SamplingStrategy::mesh;
  SampleCounts counts;
  TrainConfig<double> train;
  GridConfig grid;

  void validate() const;
};

RunConfig default_config(ProblemId id, bool desk_scale);

// A parsed document: "table.key" (or "key" at top level) -> raw value text.
using ConfigValue = std::variant<bool, long long, double, std::string, std::vector<double>>;
using ConfigEntries = std::vector<std::pair<std::string, ConfigValue>>;

// Strict TOML subset: comments, bare keys, [table] headers, strings, numbers,
// booleans and flat numeric arrays. Duplicate keys are rejected.
ConfigEntries parse_config_text(const std::string& text, const std::string& origin = "<config>");

RunConfig load_config(const std::filesystem::path& path, bool desk_scale);
RunConfig config_from_text(const std::string& text, bool desk_scale,
                           const std::string& origin = "<config>");

// Applies "key=value" with the same key names as the file ("train.dtau") or
// the short CLI aliases (mode, dtau, K, N, seed).
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Every recognized key, for diagnostics.
std::vector<std::string> config_keys();

// Canonical TOML text of a fully resolved config.
std::string dump_config(const RunConfig& cfg);

}  // namespace tsonn
