// Command-line front end: run, oracle, compare, sweep.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "tsonn/config.hpp"
#include "tsonn/oracle.hpp"
#include "tsonn/runner.hpp"

using namespace tsonn;
namespace fs = std::filesystem;

namespace {

struct RunArgs {
  std::string config;
  std::string mode, optimizer;
  std::optional<double> dtau;
  std::optional<int> K, N;
  std::optional<std::uint64_t> seed;
  bool desk = false;
  bool quiet = false;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config, "run configuration file")->required()->check(
      CLI::ExistingFile);
  cmd->add_flag("--desk-scale", a.desk, "use the reduced desk-scale defaults");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--mode", a.mode, "pinn | etsonn | itsonn");
  cmd->add_option("--dtau", a.dtau, "pseudo-time step");
  cmd->add_option("--K", a.K, "inner iterations per outer iteration");
  cmd->add_option("--N", a.N, "outer iterations");
  cmd->add_option("--seed", a.seed, "random seed");
  cmd->add_option("--optimizer", a.optimizer, "adam | lbfgs | sgd");
  cmd->add_option("--set", a.sets, "extra key=value overrides (e.g. train.resample=false)");
  cmd->add_flag("--quiet", a.quiet, "no progress output");
}

RunConfig resolve(const RunArgs& a) {
  RunConfig cfg = load_config(a.config, a.desk);
  if (!a.mode.empty()) apply_override(cfg, "mode", a.mode);
  if (!a.optimizer.empty()) apply_override(cfg, "optimizer", a.optimizer);
  if (a.dtau) cfg.train.dtau = *a.dtau;
  if (a.K) cfg.train.inner = *a.K;
  if (a.N) cfg.train.outer = *a.N;
  if (a.seed) cfg.train.seed = *a.seed;
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!a.out.empty()) cfg.out_dir = a.out;
  cfg.validate();
  return cfg;
}

int cmd_oracle(const std::string& problem, std::vector<long> grid, double reynolds, bool desk,
               const std::string& out) {
  ProblemSpec pb = make_problem(parse_problem_id(problem));
  if (reynolds > 0) pb.reynolds = reynolds;
  GridConfig g = default_grid(pb, desk);
  if (!grid.empty()) {
    g.dims[0] = grid[0];
    g.dims[1] = grid.size() > 1 ? grid[1] : 0;
    if (pb.id == ProblemId::cavity) g.oracle_n = grid[0];
  }
  nlohmann::json rep;
  rep["problem"] = to_string(pb.id);
  oracle::GridField sol;
  switch (pb.id) {
    case ProblemId::laplace_cylinder:
      sol = oracle::laplace_annulus_fd(g.dims[0], g.dims[1], oracle::FarField::freestream,
                                       pb.v_inf, pb.r_wall, pb.r_far, true);
      rep["max_stable_dt"] = sol.max_stable_dt;
      break;
    case ProblemId::burgers_steady: {
      const Index cells = g.dims[0] + 1;
      const double dt = 0.9 * oracle::burgers_explicit_bound(pb.nu, cells);
      sol = oracle::burgers_steady_fd(pb.nu, cells, dt, 1e-10);
      rep["explicit_bound"] = oracle::burgers_explicit_bound(pb.nu, cells);
      break;
    }
    case ProblemId::cavity: {
      oracle::CavitySettings cs;
      cs.reynolds = pb.reynolds;
      cs.n = g.oracle_n;
      sol = oracle::cavity_fd(cs);
      rep["reynolds"] = pb.reynolds;
      break;
    }
    case ProblemId::allen_cahn: {
      oracle::AllenCahnSettings as;
      as.nx = g.dims[0];
      as.nt = g.dims[1];
      sol = oracle::allen_cahn_fd(as);
      break;
    }
  }
  rep["points"] = sol.field.coords.rows();
  rep["shape"] = sol.field.shape;
  rep["residual"] = sol.residual;
  rep["iterations"] = sol.iterations;
  rep["converged"] = sol.converged;
  const fs::path path = out.empty() ? fs::path(to_string(pb.id) + "-oracle.csv") : fs::path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  sol.field.metadata["git_describe"] = git_describe();
  write_field(sol.field, path);
  rep["field"] = path.string();
  std::cout << rep.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-time-stepping neural PDE solver (PINN / eTSONN / iTSONN)"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "train one configuration");
  add_common(run, run_args);

  std::string oracle_problem, oracle_out;
  std::vector<long> oracle_grid;
  double oracle_re = 0;
  bool oracle_desk = false;
  auto* orc = app.add_subcommand("oracle", "finite-difference reference solution");
  orc->add_option("problem", oracle_problem, "laplace-cylinder | burgers-steady | cavity | allen-cahn")
      ->required();
  orc->add_option("--grid", oracle_grid, "grid dimensions, e.g. --grid 200 100")->expected(1, 2);
  orc->add_option("--re", oracle_re, "cavity Reynolds number");
  orc->add_flag("--desk-scale", oracle_desk, "desk-scale default grid");
  orc->add_option("--out", oracle_out, "output CSV path");

  std::string cmp_run, cmp_ref, cmp_out;
  CompareOptions cmp_opts;
  auto* cmp = app.add_subcommand("compare", "relative L2 of a run against a reference");
  cmp->add_option("--run", cmp_run, "run directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--ref", cmp_ref, "analytic | oracle | file:PATH")->required();
  cmp->add_option("--threshold", cmp_opts.threshold, "pass threshold on the overall error");
  cmp->add_flag("--interpolate", cmp_opts.interpolate, "bilinear interpolation of the reference");
  cmp->add_option("--out", cmp_out, "write the JSON report here as well");

  RunArgs sweep_args;
  std::string vary;
  int jobs = 1;
  auto* swp = app.add_subcommand("sweep", "one run per value of a config key");
  add_common(swp, sweep_args);
  swp->add_option("--vary", vary, "key=v1,v2,...")->required();
  swp->add_option("--jobs", jobs, "concurrent runs");

  CLI11_PARSE(app, argc, argv);
  apply_thread_env();

  try {
    if (*run) {
      const RunConfig cfg = resolve(run_args);
      const RunResult r = execute_run(cfg, run_args.quiet ? nullptr : &std::cerr);
      std::cout << "status " << to_string(r.status) << " dir " << r.dir.string();
      if (r.final_rel_l2) std::cout << " rel_l2 " << *r.final_rel_l2;
      std::cout << "\n";
      return 0;
    }
    if (*orc) return cmd_oracle(oracle_problem, oracle_grid, oracle_re, oracle_desk, oracle_out);
    if (*cmp) {
      const auto rep = compare_run(cmp_run, cmp_ref, cmp_opts);
      std::cout << rep.dump(2) << "\n";
      if (!cmp_out.empty()) std::ofstream(cmp_out) << rep.dump(2) << "\n";
      return 0;
    }
    if (*swp) {
      const RunConfig cfg = resolve(sweep_args);
      const auto eq = vary.find('=');
      if (eq == std::string::npos) throw ConfigError("--vary expects key=v1,v2,...");
      std::vector<std::string> values;
      std::stringstream ss(vary.substr(eq + 1));
      std::string v;
      while (std::getline(ss, v, ',')) values.push_back(v);
      const auto rep = run_sweep(cfg, vary.substr(0, eq), values, jobs,
                                 sweep_args.quiet ? nullptr : &std::cerr);
      std::cout << rep.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
