#include "tsonn/runner.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "tsonn/oracle.hpp"

#ifndef TSONN_GIT_DESCRIBE
#define TSONN_GIT_DESCRIBE "unknown"
#endif

namespace tsonn {

namespace fs = std::filesystem;

std::string git_describe() { return TSONN_GIT_DESCRIBE; }

void apply_thread_env() {
  if (const char* env = std::getenv("TSONN_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) Eigen::setNbThreads(n);
  }
}

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> state_names(const ProblemSpec& pb) {
  switch (pb.id) {
    case ProblemId::laplace_cylinder: return {"phi"};
    case ProblemId::cavity: return {"u", "v", "p"};
    default: return {"u"};
  }
}

// Network state (points x state_dim) and observables (points x obs_dim).
template <typename T>
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> predict(const ProblemSpec& pb, const Mlp<T>& net,
                                                    const Vector<T>& params,
                                                    const PointMatrix& coords) {
  const auto jets = net.forward(params, coords, pb.observable_layout(), nullptr);
  Eigen::MatrixXd state = jets.data().leftCols(jets.points()).transpose().template cast<double>();
  Eigen::MatrixXd obs = observables(pb, jets).template cast<double>();
  return {std::move(state), std::move(obs)};
}

Field assemble_prediction(const RunConfig& cfg, const Field& grid, Eigen::MatrixXd state,
                          Eigen::MatrixXd obs) {
  const ProblemSpec& pb = cfg.problem;
  Field f;
  f.problem = to_string(pb.id);
  f.provenance = "prediction";
  f.coordinate_names = grid.coordinate_names;
  f.shape = grid.shape;
  f.coords = grid.coords;
  f.component_names = state_names(pb);
  if (pb.id == ProblemId::laplace_cylinder) {
    for (const auto& n : pb.observable_names()) f.component_names.push_back(n);
    f.values.resize(state.rows(), state.cols() + obs.cols());
    f.values << state, obs;
  } else {
    f.values = std::move(state);
  }
  f.metadata["git_describe"] = git_describe();
  f.metadata["seed"] = std::to_string(cfg.train.seed);
  f.metadata["mode"] = to_string(cfg.train.mode);
  return f;
}

// Columns of `field` named like the problem's observables.
Eigen::MatrixXd observable_columns(const Field& field, const ProblemSpec& pb) {
  const auto names = pb.observable_names();
  Eigen::MatrixXd out(field.values.rows(), Index(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto it = std::find(field.component_names.begin(), field.component_names.end(), names[k]);
    if (it == field.component_names.end())
      throw std::runtime_error("field has no component '" + names[k] + "'");
    out.col(Index(k)) = field.values.col(Index(it - field.component_names.begin()));
  }
  return out;
}

bool same_points(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return ((a - b).cwiseAbs().array() <= 1e-9 * (1.0 + a.cwiseAbs().array())).all();
}

// Reference restricted / interpolated onto `grid`.
Field align(const Field& ref, const Field& grid, bool interpolate) {
  if (same_points(ref.coords, grid.coords)) return ref;
  if (!interpolate)
    throw std::runtime_error("reference grid does not match the evaluation grid (" +
                             std::to_string(ref.coords.rows()) + " vs " +
                             std::to_string(grid.coords.rows()) +
                             " points); enable interpolation to compare");
  if (ref.shape.size() != 2 || ref.coords.cols() != 2)
    throw std::runtime_error("interpolation needs a 2-D tensor-grid reference");
  Field out = ref;
  out.coords = grid.coords;
  out.shape = grid.shape;
  out.values = interpolate_bilinear(ref, grid.coords);
  out.metadata["interpolated"] = "bilinear";
  return out;
}

template <typename T>
TrainConfig<T> cast_train(const TrainConfig<double>& c) {
  TrainConfig<T> t;
  t.mode = c.mode;
  t.dtau = T(c.dtau);
  t.inner = c.inner;
  t.outer = c.outer;
  t.optimizer = c.optimizer;
  t.adam = {T(c.adam.lr), T(c.adam.beta1), T(c.adam.beta2), T(c.adam.eps)};
  t.lbfgs = {c.lbfgs.memory, T(c.lbfgs.c1), T(c.lbfgs.c2), c.lbfgs.max_trials};
  t.sgd_lr = T(c.sgd_lr);
  t.reset_on_outer = c.reset_on_outer;
  t.resample_on_outer = c.resample_on_outer;
  t.seed = c.seed;
  t.divergence_factor = c.divergence_factor;
  t.history_every = c.history_every;
  return t;
}

template <typename T>
RunResult train_typed(const RunConfig& cfg, const Field* reference, std::ostream* log) {
  const ProblemSpec& pb = cfg.problem;
  Mlp<T> net(cfg.network);
  PointSet points = sample_points(pb, cfg.counts, cfg.train.seed, cfg.sampling);
  Vector<T> theta0 = init_parameters<T>(cfg.network, cfg.train.seed);
  Trainer<Mlp<T>> trainer(net, pb, std::move(points), cast_train<T>(cfg.train), theta0);
  if (reference) {
    const Eigen::MatrixXd ref = observable_columns(*reference, pb);
    const PointMatrix coords = reference->coords;
    trainer.set_error_function([&net, &pb, ref, coords](const Vector<T>& params) {
      return relative_l2(predict(pb, net, params, coords).second, ref);
    });
  }
  while (!trainer.finished()) {
    trainer.step_outer();
    if (log && !trainer.history().rows.empty()) {
      const auto& last = trainer.history().rows.back();
      *log << "outer " << last.outer_n + 1 << "/" << cfg.train.outer
           << " loss=" << last.loss_total;
      if (last.rel_l2) *log << " rel_l2=" << *last.rel_l2;
      *log << " t=" << last.wall_time_s << "s\n";
    }
  }
  RunResult r;
  r.history = trainer.history();
  r.status = r.history.status;
  r.params = trainer.params().template cast<double>();
  for (auto it = r.history.rows.rbegin(); it != r.history.rows.rend(); ++it)
    if (it->rel_l2) {
      r.final_rel_l2 = it->rel_l2;
      break;
    }
  if (log && r.status != RunStatus::completed) *log << r.history.message << "\n";
  return r;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
  if (!f) throw std::runtime_error("error writing " + p.string());
}

}  // namespace

Field resolve_reference(const RunConfig& cfg, const std::string& source) {
  const ProblemSpec& pb = cfg.problem;
  const Field grid = evaluation_grid(pb, cfg.grid);
  if (source == "analytic") {
    if (pb.id == ProblemId::cavity || pb.id == ProblemId::allen_cahn)
      throw std::runtime_error(to_string(pb.id) + " has no analytic reference");
    return reference_field(pb, cfg.grid);
  }
  if (source == "oracle") {
    switch (pb.id) {
      case ProblemId::laplace_cylinder: {
        auto sol = oracle::laplace_annulus_fd(cfg.grid.dims[0], cfg.grid.dims[1],
                                              oracle::FarField::freestream, pb.v_inf, pb.r_wall,
                                              pb.r_far, false);
        Field f = align(sol.field, grid, false);
        f.values = f.values.leftCols(2).eval();
        f.component_names = pb.observable_names();
        return f;
      }
      case ProblemId::burgers_steady: {
        const Index cells = cfg.grid.dims[0] + 1;
        const double dt = 0.9 * oracle::burgers_explicit_bound(pb.nu, cells);
        auto sol = oracle::burgers_steady_fd(pb.nu, cells, dt, 1e-10);
        return align(sol.field, grid, false);
      }
      default: return reference_field(pb, cfg.grid);
    }
  }
  if (source.rfind("file:", 0) == 0) {
    const Field f = read_field(source.substr(5));
    Field out = align(f, grid, true);
    out.values = observable_columns(out, pb);
    out.component_names = pb.observable_names();
    out.provenance = "file";
    return out;
  }
  throw std::runtime_error("unknown reference source '" + source + "'");
}

Field predict_field(const RunConfig& cfg, const Eigen::VectorXd& params, const Field& grid) {
  if (cfg.precision == "f32") {
    Mlp<float> net(cfg.network);
    auto [s, o] = predict(cfg.problem, net, Vector<float>(params.cast<float>()), grid.coords);
    return assemble_prediction(cfg, grid, std::move(s), std::move(o));
  }
  Mlp<double> net(cfg.network);
  auto [s, o] = predict(cfg.problem, net, Vector<double>(params), grid.coords);
  return assemble_prediction(cfg, grid, std::move(s), std::move(o));
}

void write_history_csv(const RunHistory& history, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << kHistoryHeader << '\n';
  for (const auto& r : history.rows) {
    f << r.iter << ',' << r.outer_n << ',' << r.inner_k << ',' << num(r.loss_total) << ','
      << num(r.loss_main) << ',' << num(r.loss_bc) << ',' << num(r.loss_ic) << ','
      << (r.rel_l2 ? num(*r.rel_l2) : "") << ',' << num(r.wall_time_s) << '\n';
  }
  if (!f) throw std::runtime_error("error writing " + path.string());
}

std::vector<HistoryRow> read_history_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(f, line);
  if (line != kHistoryHeader) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<HistoryRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 9) throw std::runtime_error(path.string() + ": malformed row");
    HistoryRow r;
    r.iter = std::stol(cells[0]);
    r.outer_n = std::stoi(cells[1]);
    r.inner_k = std::stoi(cells[2]);
    r.loss_total = std::strtod(cells[3].c_str(), nullptr);
    r.loss_main = std::strtod(cells[4].c_str(), nullptr);
    r.loss_bc = std::strtod(cells[5].c_str(), nullptr);
    r.loss_ic = std::strtod(cells[6].c_str(), nullptr);
    if (!cells[7].empty()) r.rel_l2 = std::strtod(cells[7].c_str(), nullptr);
    r.wall_time_s = std::strtod(cells[8].c_str(), nullptr);
    rows.push_back(r);
  }
  return rows;
}

RunResult execute_run(const RunConfig& cfg, std::ostream* log) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const fs::path dir = cfg.out_dir;
  write_text(dir / "config.toml", dump_config(cfg));

  std::optional<Field> reference;
  if (cfg.reference != "none") {
    if (log) *log << "building " << cfg.reference << " reference\n";
    reference = resolve_reference(cfg, cfg.reference);
  }
  const Field* ref = reference ? &*reference : nullptr;
  RunResult r = cfg.precision == "f32" ? train_typed<float>(cfg, ref, log)
                                       : train_typed<double>(cfg, ref, log);
  r.dir = dir;

  write_history_csv(r.history, dir / "history.csv");
  const Field grid = evaluation_grid(cfg.problem, cfg.grid);
  if (r.params.allFinite()) write_field(predict_field(cfg, r.params, grid), dir / "field.csv");
  {
    std::ofstream pf(dir / "params.csv", std::ios::binary);
    for (Index i = 0; i < r.params.size(); ++i) pf << num(r.params[i]) << '\n';
  }
  nlohmann::json status;
  status["status"] = to_string(r.status);
  status["message"] = r.history.message;
  status["problem"] = to_string(cfg.problem.id);
  status["mode"] = to_string(cfg.train.mode);
  status["seed"] = cfg.train.seed;
  status["iterations"] = r.history.iterations;
  status["divergence_iter"] = r.history.divergence_iter;
  status["final_rel_l2"] = r.final_rel_l2 ? nlohmann::json(*r.final_rel_l2) : nlohmann::json();
  status["final_loss"] =
      r.history.rows.empty() ? nlohmann::json() : nlohmann::json(r.history.rows.back().loss_total);
  status["wall_time_s"] =
      r.history.rows.empty() ? 0.0 : r.history.rows.back().wall_time_s;
  status["git_describe"] = git_describe();
  write_text(dir / "status.json", status.dump(2) + "\n");
  return r;
}

nlohmann::json compare_run(const fs::path& run_dir, const std::string& source,
                           const CompareOptions& opts) {
  const RunConfig cfg = load_config(run_dir / "config.toml", false);
  const Field pred = read_field(run_dir / "field.csv");
  const ProblemSpec& pb = cfg.problem;
  Field ref;
  if (source.rfind("file:", 0) == 0) {
    Field f = read_field(source.substr(5));
    Field grid;
    grid.coords = pred.coords;
    grid.shape = pred.shape;
    ref = align(f, grid, opts.interpolate);
    ref.values = observable_columns(ref, pb);
    ref.component_names = pb.observable_names();
  } else {
    ref = resolve_reference(cfg, source);
    Field grid;
    grid.coords = pred.coords;
    grid.shape = pred.shape;
    ref = align(ref, grid, opts.interpolate);
  }
  const Eigen::MatrixXd p = observable_columns(pred, pb);
  const Eigen::MatrixXd q = observable_columns(ref, pb);
  nlohmann::json rep;
  rep["run"] = run_dir.string();
  rep["reference"] = source;
  rep["problem"] = to_string(pb.id);
  rep["points"] = p.rows();
  const auto names = pb.observable_names();
  for (std::size_t k = 0; k < names.size(); ++k)
    rep["components"][names[k]] = relative_l2(p.col(Index(k)), q.col(Index(k)));
  const double overall = relative_l2(p, q);
  rep["overall"] = overall;
  rep["threshold"] = opts.threshold;
  rep["pass"] = overall <= opts.threshold;
  return rep;
}

nlohmann::json run_sweep(const RunConfig& base, const std::string& key,
                         const std::vector<std::string>& values, int jobs, std::ostream* log) {
  std::vector<RunConfig> cfgs;
  for (const auto& v : values) {
    RunConfig c = base;
    apply_override(c, key, v);
    c.out_dir = base.out_dir / (key + "=" + v);
    c.validate();
    cfgs.push_back(std::move(c));
  }
  auto summarize = [&](std::size_t i, const RunResult& r) {
    nlohmann::json row;
    row["key"] = key;
    row["value"] = values[i];
    row["dir"] = r.dir.string();
    row["status"] = to_string(r.status);
    row["final_rel_l2"] = r.final_rel_l2 ? nlohmann::json(*r.final_rel_l2) : nlohmann::json();
    row["final_loss"] = r.history.rows.empty() ? nlohmann::json()
                                               : nlohmann::json(r.history.rows.back().loss_total);
    return row;
  };
  nlohmann::json out = nlohmann::json::array();
  std::vector<nlohmann::json> rows(cfgs.size());
  jobs = std::max(1, jobs);
  for (std::size_t start = 0; start < cfgs.size(); start += std::size_t(jobs)) {
    const std::size_t end = std::min(cfgs.size(), start + std::size_t(jobs));
    if (jobs == 1) {
      rows[start] = summarize(start, execute_run(cfgs[start], log));
      continue;
    }
    std::vector<std::future<RunResult>> fut;
    for (std::size_t i = start; i < end; ++i)
      fut.push_back(std::async(std::launch::async, [&cfgs, i] { return execute_run(cfgs[i]); }));
    for (std::size_t i = start; i < end; ++i) rows[i] = summarize(i, fut[i - start].get());
  }
  for (auto& r : rows) out.push_back(std::move(r));
  fs::create_directories(base.out_dir);
  write_text(base.out_dir / "sweep.json", out.dump(2) + "\n");
  return out;
}

}  // namespace tsonn
