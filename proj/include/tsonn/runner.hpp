#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsonn/config.hpp"
#include "tsonn/field.hpp"
#include "tsonn/trainer.hpp"

namespace tsonn {

inline constexpr const char* kHistoryHeader =
    "iter,outer_n,inner_k,loss_total,loss_main,loss_bc,loss_ic,rel_l2,wall_time_s";

struct RunResult {
  RunStatus status = RunStatus::running;
  std::filesystem::path dir;
  RunHistory history;
  std::optional<double> final_rel_l2;
  Eigen::VectorXd params;  // widened to double for f32 runs
};

// Trains according to cfg and writes config.toml, history.csv, field.csv (+
// sidecar), params.csv and status.json into cfg.out_dir. Divergence is a
// normal outcome; exceptions signal I/O or validation failures only.
RunResult execute_run(const RunConfig& cfg, std::ostream* log = nullptr);

// Reference observables on the config's evaluation grid. source is
// analytic | oracle | file:PATH.
Field resolve_reference(const RunConfig& cfg, const std::string& source);

// Network state and observables on an evaluation grid.
Field predict_field(const RunConfig& cfg, const Eigen::VectorXd& params, const Field& grid);

void write_history_csv(const RunHistory& history, const std::filesystem::path& path);
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);

struct CompareOptions {
  double threshold = 5e-2;
  bool interpolate = false;
};

// Relative L2 of the run's final field against a reference, per observable
// component and over all components together.
nlohmann::json compare_run(const std::filesystem::path& run_dir, const std::string& source,
                           const CompareOptions& opts = {});

// One run per value of `key`, each in its own subdirectory of base.out_dir.
// Returns a summary row per run.
nlohmann::json run_sweep(const RunConfig& base, const std::string& key,
                         const std::vector<std::string>& values, int jobs = 1,
                         std::ostream* log = nullptr);

// Applies TSONN_THREADS to Eigen's thread pool when built with OpenMP.
void apply_thread_env();

std::string git_describe();

}  // namespace tsonn
