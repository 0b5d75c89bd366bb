#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsonn/loss.hpp"
#include "tsonn/optim.hpp"
#include "tsonn/problems.hpp"

namespace tsonn {

enum class OptimizerKind { adam, lbfgs, sgd };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::lbfgs: return "lbfgs";
    case OptimizerKind::sgd: return "sgd";
  }
  return "?";
}

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "lbfgs") return OptimizerKind::lbfgs;
  if (s == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam, lbfgs, sgd)");
}

enum class RunStatus { running, completed, diverged, stalled };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::completed: return "completed";
    case RunStatus::diverged: return "diverged";
    case RunStatus::stalled: return "stalled";
  }
  return "?";
}

template <typename T>
struct TrainConfig {
  Mode mode = Mode::itsonn;
  T dtau = T(0.1);
  int inner = 100;  // K
  int outer = 10;   // N_outer
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamSettings<T> adam{};
  LbfgsSettings<T> lbfgs{};
  T sgd_lr = T(1e-3);
  // Unset means: reset L-BFGS whenever the loss program changes, keep Adam
  // moments across outer iterations.
  std::optional<bool> reset_on_outer;
  bool resample_on_outer = false;
  std::uint64_t seed = 0;
  double divergence_factor = 1e6;
  int history_every = 1;

  void validate() const {
    if (mode != Mode::pinn && !(dtau > T(0))) throw std::invalid_argument("dtau must be > 0");
    if (inner < 1) throw std::invalid_argument("K must be >= 1");
    if (outer < 1) throw std::invalid_argument("N_outer must be >= 1");
    if (history_every < 1) throw std::invalid_argument("history cadence must be >= 1");
    if (!(divergence_factor > 1.0)) throw std::invalid_argument("divergence factor must be > 1");
  }
};

// One inner iteration. Loss columns hold the loss at the parameters the step
// started from; rel_l2 is set on the last row of each outer iteration and
// measures the parameters the outer iteration ended with.
struct HistoryRow {
  long iter = 0;
  int outer_n = 0;
  int inner_k = 0;
  double loss_total = 0;
  double loss_main = 0;
  double loss_bc = 0;
  double loss_ic = 0;
  std::optional<double> rel_l2;
  double wall_time_s = 0;
};

struct RunHistory {
  std::vector<HistoryRow> rows;
  RunStatus status = RunStatus::running;
  long iterations = 0;
  long divergence_iter = -1;
  std::string message;
};

// Frozen copy of the parameters that defines pseudo-time level n.
template <typename T>
class ParameterSnapshot {
 public:
  ParameterSnapshot(int outer_index, Vector<T> params)
      : outer_index_(outer_index), params_(std::move(params)) {}
  int outer_index() const { return outer_index_; }
  const Vector<T>& params() const { return params_; }

 private:
  int outer_index_;
  Vector<T> params_;
};

// u(snapshot) at the interior points, state_dim x m.
template <typename Model>
Matrix<typename Model::Scalar> snapshot_values(const Model& model,
                                              const Vector<typename Model::Scalar>& snapshot,
                                              const PointSet& points, const ProblemSpec& pb) {
  const auto jets = model.forward(snapshot, points.interior, JetLayout::values(pb.input_dim()),
                                  nullptr);
  return jets.data().leftCols(jets.points());
}

// Explicit Euler labels u + dtau N[u] at the interior points, state_dim x m.
template <typename Model>
Matrix<typename Model::Scalar> explicit_labels(const Model& model,
                                              const Vector<typename Model::Scalar>& snapshot,
                                              const PointSet& points, const ProblemSpec& pb,
                                              typename Model::Scalar dtau) {
  using T = typename Model::Scalar;
  const auto jets = model.forward(snapshot, points.interior, pb.interior_layout(), nullptr);
  const Matrix<T> n = pde_residual(pb, jets, points.interior);
  Matrix<T> labels(pb.state_dim(), jets.points());
  for (Index p = 0; p < jets.points(); ++p)
    for (int c = 0; c < pb.state_dim(); ++c) labels(c, p) = jets.value(p, c) + dtau * n(p, c);
  return labels;
}

// The unified inner/outer loop. PINN, eTSONN and iTSONN differ only in the
// loss program bound at the start of each outer iteration.
template <typename Model>
class Trainer {
 public:
  using T = typename Model::Scalar;
  using ErrorFn = std::function<double(const Vector<T>&)>;

  Trainer(const Model& model, const ProblemSpec& problem, PointSet points, TrainConfig<T> cfg,
          Vector<T> theta0)
      : model_(model),
        problem_(problem),
        points_(std::move(points)),
        cfg_(cfg),
        theta_(std::move(theta0)),
        snapshot_(0, theta_),
        program_(model_, problem_, points_, cfg.mode, cfg.mode == Mode::pinn ? T(1) : cfg.dtau),
        adam_(cfg.adam),
        lbfgs_(cfg.lbfgs),
        sgd_(cfg.sgd_lr) {
    cfg_.validate();
    problem_.validate();
    if (theta_.size() != model_.parameter_count())
      throw std::invalid_argument("initial parameter vector has the wrong length");
  }

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  void set_error_function(ErrorFn f) { error_ = std::move(f); }

  const TrainConfig<T>& config() const { return cfg_; }
  const Vector<T>& params() const { return theta_; }
  const ParameterSnapshot<T>& snapshot() const { return snapshot_; }
  const PointSet& points() const { return points_; }
  const LossProgram<Model>& program() const { return program_; }
  const Matrix<T>& labels() const { return labels_; }
  const RunHistory& history() const { return history_; }
  const Lbfgs<T>& lbfgs() const { return lbfgs_; }
  const Adam<T>& adam() const { return adam_; }
  int outer_index() const { return n_; }
  bool finished() const { return history_.status != RunStatus::running; }

  // Runs one outer iteration: bind the loss program for level n, take K inner
  // steps, then advance the snapshot. Returns false once the run has ended.
  bool step_outer() {
    if (finished()) return false;
    if (!started_) {
      clock_start_ = Clock::now();
      started_ = true;
    }
    if (!bind_level()) return false;
    for (int k = 0; k < cfg_.inner; ++k)
      if (!inner_step(k)) return false;
    outer_update();
    return !finished();
  }

  const RunHistory& run() {
    while (step_outer()) {
    }
    return history_;
  }

 private:
  using Clock = std::chrono::steady_clock;

  // Snapshot-dependent data for the current level plus optimizer restarts.
  bool bind_level() {
    const bool program_changed = cfg_.mode != Mode::pinn || resampled_;
    if (cfg_.mode == Mode::etsonn) {
      labels_ = explicit_labels(model_, snapshot_.params(), points_, problem_, cfg_.dtau);
      if (!labels_.allFinite()) {
        diverge(history_.iterations, "explicit labels are not finite", false);
        return false;
      }
      program_.bind_labels(labels_);
    } else if (cfg_.mode == Mode::itsonn) {
      program_.bind_anchor(snapshot_values(model_, snapshot_.params(), points_, problem_));
    }
    if (n_ > 0) {
      const bool reset_lbfgs = cfg_.reset_on_outer.value_or(program_changed);
      const bool reset_adam = cfg_.reset_on_outer.value_or(false);
      if (cfg_.optimizer == OptimizerKind::lbfgs && reset_lbfgs) lbfgs_.reset();
      if (cfg_.optimizer == OptimizerKind::adam && reset_adam) adam_.reset();
    }
    have_fg_ = false;
    resampled_ = false;
    return true;
  }

  bool inner_step(int k) {
    const long iter = history_.iterations;
    LossValue<T> v;
    if (cfg_.optimizer == OptimizerKind::lbfgs && have_fg_) {
      v = value_;
    } else {
      v = program_.evaluate(theta_, &grad_);
      value_ = v;
      have_fg_ = true;
    }
    if (!initial_loss_) initial_loss_ = double(v.total);
    const bool non_finite = !v.finite() || !grad_.allFinite();
    const bool blown = double(v.total) > cfg_.divergence_factor * *initial_loss_;
    if (k % cfg_.history_every == 0 || k == cfg_.inner - 1 || non_finite || blown)
      record(iter, k, v);
    if (non_finite) {
      diverge(iter, "loss became non-finite");
      return false;
    }
    if (blown) {
      diverge(iter, "loss exceeded divergence threshold");
      return false;
    }

    StepStatus st = StepStatus::ok;
    switch (cfg_.optimizer) {
      case OptimizerKind::adam:
        st = adam_.step(theta_, grad_);
        have_fg_ = false;
        break;
      case OptimizerKind::sgd:
        st = sgd_.step(theta_, grad_);
        have_fg_ = false;
        break;
      case OptimizerKind::lbfgs: {
        T f = value_.total;
        Evaluator<T> eval = [this](const Vector<T>& x, Vector<T>& g) {
          last_probe_ = program_.evaluate(x, &g);
          return last_probe_.total;
        };
        const Vector<T> before = theta_;
        st = lbfgs_.step(theta_, f, grad_, eval);
        if (st == StepStatus::ok) {
          // Every line-search exit path ends with a probe at the accepted point.
          value_ = last_probe_;
        } else {
          theta_ = before;
        }
        break;
      }
    }
    ++history_.iterations;
    if (st == StepStatus::refused) {
      diverge(iter, "optimizer refused a non-finite gradient");
      return false;
    }
    if (st == StepStatus::stalled) {
      history_.status = RunStatus::stalled;
      history_.message = "line search stalled at iteration " + std::to_string(iter);
      close_outer();
      return false;
    }
    return true;
  }

  void outer_update() {
    close_outer();
    ++n_;
    if (n_ >= cfg_.outer) {
      history_.status = RunStatus::completed;
      return;
    }
    snapshot_ = ParameterSnapshot<T>(n_, theta_);
    if (cfg_.resample_on_outer) {
      resample_interior(problem_, points_, cfg_.seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(n_));
      resampled_ = true;
    }
  }

  // Attaches the error of the current parameters to the last recorded row.
  void close_outer() {
    if (!error_ || history_.rows.empty()) return;
    HistoryRow& last = history_.rows.back();
    if (last.outer_n != n_) return;
    last.rel_l2 = error_(theta_);
  }

  void record(long iter, int k, const LossValue<T>& v) {
    HistoryRow row;
    row.iter = iter;
    row.outer_n = n_;
    row.inner_k = k;
    row.loss_total = double(v.total);
    row.loss_main = double(v.main);
    row.loss_bc = double(v.bc);
    row.loss_ic = double(v.ic);
    row.wall_time_s = std::chrono::duration<double>(Clock::now() - clock_start_).count();
    history_.rows.push_back(row);
  }

  // counted: the failing loss evaluation was recorded as iteration `iter`.
  void diverge(long iter, const std::string& why, bool counted = true) {
    if (counted) history_.iterations = iter + 1;
    history_.status = RunStatus::diverged;
    history_.divergence_iter = iter;
    history_.message = why + " at iteration " + std::to_string(iter);
  }

  const Model& model_;
  ProblemSpec problem_;
  PointSet points_;
  TrainConfig<T> cfg_;
  Vector<T> theta_;
  ParameterSnapshot<T> snapshot_;
  LossProgram<Model> program_;
  Adam<T> adam_;
  Lbfgs<T> lbfgs_;
  GradientDescent<T> sgd_;
  ErrorFn error_;

  Matrix<T> labels_;
  Vector<T> grad_;
  LossValue<T> value_, last_probe_;
  bool have_fg_ = false;
  bool resampled_ = false;
  bool started_ = false;
  int n_ = 0;
  std::optional<double> initial_loss_;
  RunHistory history_;
  Clock::time_point clock_start_{};
};

}  // namespace tsonn
