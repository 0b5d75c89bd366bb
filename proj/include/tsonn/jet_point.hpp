#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include "tsonn/network.hpp"

namespace tsonn {

inline constexpr int kMaxState = 3;
inline constexpr int kMaxInput = 3;
// Two points (periodic pairs) x kMaxState outputs x 6 channels.
inline constexpr int kMaxSlots = 36;

// Forward-mode scalar used to differentiate residuals with respect to the
// entries of a jet.
template <typename T>
using Dual = Eigen::AutoDiffScalar<Eigen::Matrix<T, Eigen::Dynamic, 1, 0, kMaxSlots, 1>>;

// Underlying real type of a plain or dual scalar.
template <typename S>
struct ScalarOf {
  using type = S;
};
template <typename D>
struct ScalarOf<Eigen::AutoDiffScalar<D>> {
  using type = typename D::Scalar;
};
template <typename S>
using scalar_of_t = typename ScalarOf<S>::type;

// The jet of a single point in a form residual operators can read directly.
// Entries the layout does not carry stay zero.
template <typename S>
struct JetPoint {
  S u[kMaxState];
  S du[kMaxState][kMaxInput];
  S d2u[kMaxState][kMaxInput][kMaxInput];
  double x[kMaxInput] = {0.0, 0.0, 0.0};

  JetPoint() {
    for (int o = 0; o < kMaxState; ++o) {
      u[o] = S(0);
      for (int i = 0; i < kMaxInput; ++i) {
        du[o][i] = S(0);
        for (int j = 0; j < kMaxInput; ++j) d2u[o][i][j] = S(0);
      }
    }
  }
};

template <typename T>
JetPoint<T> plain_point(const JetBatch<T>& jets, const PointMatrix& coords, Index p) {
  JetPoint<T> jp;
  const JetLayout& layout = jets.layout();
  const Index n = jets.points();
  const auto& data = jets.data();
  for (int k = 0; k < coords.cols(); ++k) jp.x[k] = coords(p, k);
  for (int o = 0; o < jets.output_dim(); ++o) {
    jp.u[o] = data(o, p);
    if (layout.order >= 1)
      for (int i = 0; i < layout.input_dim; ++i) jp.du[o][i] = data(o, Index(1 + i) * n + p);
    for (std::size_t q = 0; q < layout.pairs.size() && layout.order >= 2; ++q) {
      const auto [i, j] = layout.pairs[q];
      jp.d2u[o][i][j] = jp.d2u[o][j][i] = data(o, Index(1 + layout.input_dim + q) * n + p);
    }
  }
  return jp;
}

// Number of derivative slots one seeded point occupies.
template <typename T>
int slots_per_point(const JetBatch<T>& jets) {
  return jets.output_dim() * jets.layout().channels();
}

// Seeds every carried jet entry of point p as an independent variable. Slot
// (o * channels + c) + offset corresponds to output o, channel c.
template <typename T>
JetPoint<Dual<T>> seeded_point(const JetBatch<T>& jets, const PointMatrix& coords, Index p,
                               int offset, int total_slots) {
  JetPoint<Dual<T>> jp;
  const JetLayout& layout = jets.layout();
  const Index n = jets.points();
  const int channels = layout.channels();
  const auto& data = jets.data();
  for (int k = 0; k < coords.cols(); ++k) jp.x[k] = coords(p, k);
  auto var = [&](int o, int c) {
    return Dual<T>(data(o, Index(c) * n + p), total_slots, offset + o * channels + c);
  };
  for (int o = 0; o < jets.output_dim(); ++o) {
    jp.u[o] = var(o, 0);
    if (layout.order >= 1)
      for (int i = 0; i < layout.input_dim; ++i) jp.du[o][i] = var(o, 1 + i);
    for (std::size_t q = 0; q < layout.pairs.size() && layout.order >= 2; ++q) {
      const auto [i, j] = layout.pairs[q];
      jp.d2u[o][i][j] = jp.d2u[o][j][i] = var(o, 1 + layout.input_dim + int(q));
    }
  }
  return jp;
}

// Adds weight * d(value)/d(slots) for one seeded point into the adjoint matrix.
template <typename T, typename Derivs>
void scatter_adjoint(const Derivs& derivs, Index p, int offset, int channels, Index n,
                     T weight, Matrix<T>& adjoint) {
  if (derivs.size() == 0) return;
  for (int o = 0; o < adjoint.rows(); ++o)
    for (int c = 0; c < channels; ++c) {
      const int slot = offset + o * channels + c;
      if (slot < derivs.size()) adjoint(o, Index(c) * n + p) += weight * derivs[slot];
    }
}

}  // namespace tsonn
