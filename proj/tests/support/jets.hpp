#pragma once

#include <array>

#include "tsonn/network.hpp"

namespace tsonn::test {

// Exact value / gradient / Hessian of one output at one point.
struct PointJet {
  double v = 0;
  std::array<double, 3> g{0, 0, 0};
  std::array<std::array<double, 3>, 3> h{};
};

// Builds a JetBatch from a closed-form function f(point row, output) ->
// PointJet, filling only the channels the layout carries.
template <typename F>
JetBatch<double> make_jets(const JetLayout& layout, int out_dim, const PointMatrix& pts, F&& f) {
  const Index n = pts.rows();
  Matrix<double> data = Matrix<double>::Zero(out_dim, Index(layout.channels()) * n);
  for (Index p = 0; p < n; ++p)
    for (int o = 0; o < out_dim; ++o) {
      const PointJet j = f(pts.row(p), o);
      data(o, p) = j.v;
      if (layout.order >= 1)
        for (int i = 0; i < layout.input_dim; ++i)
          data(o, Index(layout.grad_channel(i)) * n + p) = j.g[std::size_t(i)];
      if (layout.order >= 2)
        for (const auto& [a, b] : layout.pairs)
          data(o, Index(layout.pair_channel(a, b)) * n + p) =
              j.h[std::size_t(a)][std::size_t(b)];
    }
  return JetBatch<double>(layout, n, std::move(data));
}

// The cylinder potential V x (1 + R^2 / r^2) with its exact derivatives.
inline PointJet cylinder_potential_jet(double x, double y, double v, double radius) {
  const double r2 = x * x + y * y, r4 = r2 * r2, r6 = r4 * r2, R2 = radius * radius;
  PointJet j;
  j.v = v * x * (1 + R2 / r2);
  j.g[0] = v * (1 - R2 * (x * x - y * y) / r4);
  j.g[1] = -2 * v * R2 * x * y / r4;
  const double hxx = -2 * v * R2 * x * (3 * y * y - x * x) / r6;
  const double hxy = 2 * v * R2 * y * (3 * x * x - y * y) / r6;
  j.h[0][0] = hxx;
  j.h[1][1] = -hxx;
  j.h[0][1] = j.h[1][0] = hxy;
  return j;
}

}  // namespace tsonn::test
