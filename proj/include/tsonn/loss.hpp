#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "tsonn/jet_point.hpp"
#include "tsonn/problems.hpp"

namespace tsonn {

enum class Mode { pinn, etsonn, itsonn };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::pinn: return "pinn";
    case Mode::etsonn: return "etsonn";
    case Mode::itsonn: return "itsonn";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "pinn") return Mode::pinn;
  if (s == "etsonn") return Mode::etsonn;
  if (s == "itsonn") return Mode::itsonn;
  throw std::invalid_argument("unknown mode '" + s + "' (expected pinn, etsonn, itsonn)");
}

// Loss components: main is the PDE / eTS / iTS interior term; bc and ic are
// unweighted mean squares. total = scale * (main + lambda_bc bc + lambda_ic ic).
template <typename T>
struct LossValue {
  T total = 0;
  T main = 0;
  T bc = 0;
  T ic = 0;

  bool finite() const { return std::isfinite(double(total)); }
};

template <typename T>
struct LossGradient {
  LossValue<T> value;
  Vector<T> gradient;  // empty when the loss is not finite
  bool diverged = false;
};

// A scalar function of the parameters fully determined by the mode, the
// point set, the problem, the pseudo-time step and (for eTSONN / iTSONN) the
// snapshot data:
//   pinn    main = mean |N[u(theta)]|^2
//   etsonn  main = mean |u(theta) - label|^2 / dtau^2
//   itsonn  main = mean |u(theta) - u(snapshot) - dtau N[u(theta)]|^2 / dtau^2
template <typename Model>
class LossProgram {
 public:
  using T = typename Model::Scalar;

  LossProgram(const Model& model, const ProblemSpec& problem, const PointSet& points, Mode mode,
              T dtau)
      : model_(&model), problem_(&problem), points_(&points), mode_(mode), dtau_(dtau) {
    if (mode != Mode::pinn && !(dtau > T(0)))
      throw std::invalid_argument("pseudo-time step must be positive");
  }

  // u(snapshot) at the interior points, state_dim x m.
  void bind_anchor(Matrix<T> anchor) { anchor_ = std::move(anchor); }
  // Explicit labels u(snapshot) + dtau N[u(snapshot)], state_dim x m.
  void bind_labels(Matrix<T> labels) { labels_ = std::move(labels); }
  void set_scale(T c) { scale_ = c; }

  Mode mode() const { return mode_; }
  T dtau() const { return dtau_; }
  const PointSet& points() const { return *points_; }
  const ProblemSpec& problem() const { return *problem_; }

  LossValue<T> evaluate(const Vector<T>& params, Vector<T>* grad) const {
    check_bound();
    const ProblemSpec& pb = *problem_;
    const PointSet& ps = *points_;
    if (grad) *grad = Vector<T>::Zero(params.size());
    LossValue<T> v;

    const int sd = pb.state_dim();
    const JetLayout main_layout =
        mode_ == Mode::etsonn ? JetLayout::values(pb.input_dim()) : pb.interior_layout();
    const T inv_dt = mode_ == Mode::pinn ? T(0) : T(1) / dtau_;
    auto interior = [&](const auto& j, const auto&, Index p, auto* r) -> int {
      switch (mode_) {
        case Mode::pinn: pde_operator(pb, j, r); break;
        case Mode::etsonn:
          for (int c = 0; c < sd; ++c) r[c] = (j.u[c] - labels_(c, p)) * inv_dt;
          break;
        case Mode::itsonn: {
          pde_operator(pb, j, r);
          for (int c = 0; c < sd; ++c) r[c] = (j.u[c] - anchor_(c, p)) * inv_dt - r[c];
          break;
        }
      }
      return sd;
    };
    v.main = group_loss(params, ps.interior, main_layout, ps.interior.rows(), nullptr, interior,
                        scale_, grad);

    if (!ps.boundary_items.empty()) {
      auto boundary = [&](const auto& a, const auto& b, Index k, auto* r) -> int {
        return boundary_operator(pb, ps.boundary_items[std::size_t(k)], a, b, r);
      };
      v.bc = group_loss(params, ps.boundary, pb.boundary_layout(),
                        Index(ps.boundary_items.size()), &ps.boundary_items, boundary,
                        scale_ * T(pb.lambda_bc), grad);
    }
    if (pb.time_dependent() && ps.initial.rows() > 0) {
      auto initial = [&](const auto& j, const auto&, Index, auto* r) -> int {
        initial_operator(pb, j, r);
        return 1;
      };
      v.ic = group_loss(params, ps.initial, pb.initial_layout(), ps.initial.rows(), nullptr,
                        initial, scale_ * T(pb.lambda_ic), grad);
    }
    v.total = scale_ * (v.main + T(pb.lambda_bc) * v.bc + T(pb.lambda_ic) * v.ic);
    return v;
  }

  LossGradient<T> loss_gradient(const Vector<T>& params) const {
    LossGradient<T> out;
    Vector<T> g;
    out.value = evaluate(params, &g);
    if (!out.value.finite() || !g.allFinite()) {
      out.diverged = true;
      return out;
    }
    out.gradient = std::move(g);
    return out;
  }

 private:
  void check_bound() const {
    const Index m = points_->interior.rows();
    const int sd = problem_->state_dim();
    if (mode_ == Mode::etsonn && (labels_.rows() != sd || labels_.cols() != m))
      throw std::logic_error("eTSONN loss evaluated without labels for the current points");
    if (mode_ == Mode::itsonn && (anchor_.rows() != sd || anchor_.cols() != m))
      throw std::logic_error("iTSONN loss evaluated without a snapshot for the current points");
  }

  // Mean over items of the squared residual norm; adds weight * gradient of
  // that mean into grad when requested.
  template <typename Residual>
  T group_loss(const Vector<T>& params, const PointMatrix& pts, const JetLayout& layout,
               Index n_items, const std::vector<BoundaryItem>* items, Residual&& residual,
               T weight, Vector<T>* grad) const {
    if (n_items == 0) return T(0);
    auto pair_of = [items](Index k) -> std::pair<Index, Index> {
      if (!items) return {k, -1};
      const auto& it = (*items)[std::size_t(k)];
      return {it.a, it.b};
    };
    typename Model::Tape tape;
    const JetBatch<T> jets = model_->forward(params, pts, layout, grad ? &tape : nullptr);
    T sum = T(0);
    if (!grad) {
      T r[kMaxState] = {};
      for (Index k = 0; k < n_items; ++k) {
        const auto [a, b] = pair_of(k);
        const auto ja = plain_point(jets, pts, a);
        const auto jb = b >= 0 ? plain_point(jets, pts, b) : ja;
        const int nr = residual(ja, jb, k, r);
        for (int c = 0; c < nr; ++c) sum += r[c] * r[c];
      }
      return sum / T(n_items);
    }

    Matrix<T> adjoint = Matrix<T>::Zero(jets.data().rows(), jets.data().cols());
    const int spp = slots_per_point(jets);
    const int channels = layout.channels();
    const T w = weight / T(n_items);
    Dual<T> r[kMaxState];
    for (Index k = 0; k < n_items; ++k) {
      const auto [a, b] = pair_of(k);
      const int total = b >= 0 ? 2 * spp : spp;
      const auto ja = seeded_point(jets, pts, a, 0, total);
      const auto jb = b >= 0 ? seeded_point(jets, pts, b, spp, total) : ja;
      const int nr = residual(ja, jb, k, r);
      Dual<T> l = r[0] * r[0];
      for (int c = 1; c < nr; ++c) l += r[c] * r[c];
      sum += l.value();
      scatter_adjoint(l.derivatives(), a, 0, channels, jets.points(), w, adjoint);
      if (b >= 0) scatter_adjoint(l.derivatives(), b, spp, channels, jets.points(), w, adjoint);
    }
    model_->backward(params, tape, adjoint, *grad);
    return sum / T(n_items);
  }

  const Model* model_;
  const ProblemSpec* problem_;
  const PointSet* points_;
  Mode mode_;
  T dtau_;
  T scale_ = T(1);
  Matrix<T> anchor_;
  Matrix<T> labels_;
};

}  // namespace tsonn
