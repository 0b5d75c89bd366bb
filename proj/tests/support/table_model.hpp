#pragma once

#include <cmath>
#include <stdexcept>

#include "tsonn/network.hpp"

namespace tsonn::test {

// 1-D scalar approximator whose parameters are the values at the interior
// nodes of a uniform grid on [x0, x1]; the two end nodes are fixed. Queries
// must land on nodes. Derivatives are the central differences the explicit
// Euler oracle uses, written with the same operation order so labels agree
// bit for bit.
class TableModel {
 public:
  using Scalar = double;
  struct Tape {
    JetLayout layout;
    Index points = 0;
    std::vector<Index> nodes;
  };

  TableModel(double x0, double x1, Index interior, double left, double right)
      : x0_(x0), x1_(x1), n_(interior + 2), left_(left), right_(right) {
    // Mirrors the oracle's spacing: span over node count minus one.
    h_ = (x1_ - x0_) / double(n_ - 1);
  }

  Index parameter_count() const { return n_ - 2; }
  double spacing() const { return h_; }

  JetBatch<double> forward(const Vector<double>& params, const PointMatrix& pts,
                           const JetLayout& layout, Tape* tape = nullptr) const {
    if (layout.input_dim != 1 || pts.cols() != 1)
      throw std::invalid_argument("table model is one-dimensional");
    const Index m = pts.rows();
    Matrix<double> data = Matrix<double>::Zero(1, Index(layout.channels()) * m);
    std::vector<Index> nodes(static_cast<std::size_t>(m));
    const int cxx = layout.pair_channel(0, 0);
    for (Index p = 0; p < m; ++p) {
      const Index i = locate(pts(p, 0));
      nodes[std::size_t(p)] = i;
      data(0, p) = at(params, i);
      if (i == 0 || i == n_ - 1) continue;  // fixed nodes: no derivative channels
      const double um = at(params, i - 1), u0 = at(params, i), up = at(params, i + 1);
      if (layout.order >= 1) data(0, m + p) = (up - um) / (2.0 * h_);
      if (cxx >= 0) data(0, Index(cxx) * m + p) = (up - 2.0 * u0 + um) / (h_ * h_);
    }
    if (tape) {
      tape->layout = layout;
      tape->points = m;
      tape->nodes = std::move(nodes);
    }
    return JetBatch<double>(layout, m, std::move(data));
  }

  // Accumulates d(sum adjoint .* jet)/d(params) into grad.
  void backward(const Vector<double>& params, const Tape& tape, const Matrix<double>& adjoint,
                Vector<double>& grad) const {
    if (grad.size() != params.size()) grad = Vector<double>::Zero(params.size());
    const Index m = tape.points;
    const int cxx = tape.layout.pair_channel(0, 0);
    auto add = [&](Index node, double w) {
      if (node >= 1 && node <= n_ - 2) grad[node - 1] += w;
    };
    for (Index p = 0; p < m; ++p) {
      const Index i = tape.nodes[std::size_t(p)];
      add(i, adjoint(0, p));
      if (i == 0 || i == n_ - 1) continue;
      if (tape.layout.order >= 1) {
        const double a = adjoint(0, m + p) / (2.0 * h_);
        add(i + 1, a);
        add(i - 1, -a);
      }
      if (cxx >= 0) {
        const double a = adjoint(0, Index(cxx) * m + p) / (h_ * h_);
        add(i + 1, a);
        add(i, -2.0 * a);
        add(i - 1, a);
      }
    }
  }

 private:
  Index locate(double x) const {
    const double s = (x - x0_) / h_;
    const Index i = Index(std::llround(s));
    if (i < 0 || i >= n_ || std::abs(s - double(i)) > 1e-6)
      throw std::invalid_argument("table model queried off its nodes");
    return i;
  }
  double at(const Vector<double>& params, Index i) const {
    if (i == 0) return left_;
    if (i == n_ - 1) return right_;
    return params[i - 1];
  }

  double x0_, x1_;
  Index n_;
  double left_, right_;
  double h_;
};

}  // namespace tsonn::test
