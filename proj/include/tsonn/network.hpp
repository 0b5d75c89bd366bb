#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "tsonn/types.hpp"

namespace tsonn {

// Fully connected tanh network. Hidden layers use tanh, the output layer is
// affine.
struct NetworkShape {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_layers = 1;
  int hidden_width = 1;

  void validate() const {
    if (input_dim < 1 || output_dim < 1 || hidden_layers < 1 || hidden_width < 1)
      throw std::invalid_argument("network shape counts must all be >= 1");
  }

  int affine_layers() const { return hidden_layers + 1; }
  int fan_in(int layer) const { return layer == 0 ? input_dim : hidden_width; }
  int fan_out(int layer) const {
    return layer == hidden_layers ? output_dim : hidden_width;
  }

  // Parameters are stored layer by layer: the weight matrix W (fan_out x
  // fan_in, column-major) followed by the bias vector b (fan_out).
  Index parameter_count() const {
    Index total = 0;
    for (int l = 0; l < affine_layers(); ++l)
      total += Index(fan_in(l)) * fan_out(l) + fan_out(l);
    return total;
  }

  Index weight_offset(int layer) const {
    Index offset = 0;
    for (int l = 0; l < layer; ++l)
      offset += Index(fan_in(l)) * fan_out(l) + fan_out(l);
    return offset;
  }
  Index bias_offset(int layer) const {
    return weight_offset(layer) + Index(fan_in(layer)) * fan_out(layer);
  }
};

// Which input derivatives a jet carries. Channel 0 is the value, channels
// 1..input_dim are first derivatives (order >= 1), and the remaining channels
// are the requested second derivatives (i, j) with i <= j (order 2).
struct JetLayout {
  int input_dim = 1;
  int order = 0;
  std::vector<std::array<int, 2>> pairs;

  static JetLayout values(int input_dim) { return {input_dim, 0, {}}; }
  static JetLayout first(int input_dim) { return {input_dim, 1, {}}; }
  static JetLayout full(int input_dim) {
    JetLayout layout{input_dim, 2, {}};
    for (int i = 0; i < input_dim; ++i)
      for (int j = i; j < input_dim; ++j) layout.pairs.push_back({i, j});
    return layout;
  }
  static JetLayout second(int input_dim, std::vector<std::array<int, 2>> pairs) {
    JetLayout layout{input_dim, 2, std::move(pairs)};
    for (auto& p : layout.pairs) {
      if (p[0] > p[1]) std::swap(p[0], p[1]);
      if (p[0] < 0 || p[1] >= input_dim)
        throw std::invalid_argument("second-derivative pair out of range");
    }
    return layout;
  }

  int channels() const {
    return 1 + (order >= 1 ? input_dim : 0) + (order >= 2 ? int(pairs.size()) : 0);
  }
  int grad_channel(int i) const { return 1 + i; }
  // -1 when the pair is not carried.
  int pair_channel(int i, int j) const {
    if (order < 2) return -1;
    if (i > j) std::swap(i, j);
    for (std::size_t p = 0; p < pairs.size(); ++p)
      if (pairs[p][0] == i && pairs[p][1] == j) return 1 + input_dim + int(p);
    return -1;
  }
  bool covers(const JetLayout& needed) const {
    if (needed.order > order || needed.input_dim != input_dim) return false;
    for (const auto& p : needed.pairs)
      if (pair_channel(p[0], p[1]) < 0) return false;
    return true;
  }
};

// Network outputs and their input derivatives at a batch of points. The data
// matrix is output_dim x (channels * points); channel c of point p lives in
// column c * points + p.
template <typename Scalar>
class JetBatch {
 public:
  JetBatch() = default;
  JetBatch(JetLayout layout, Index points, Matrix<Scalar> data)
      : layout_(std::move(layout)), points_(points), data_(std::move(data)) {}

  const JetLayout& layout() const { return layout_; }
  Index points() const { return points_; }
  int output_dim() const { return int(data_.rows()); }
  const Matrix<Scalar>& data() const { return data_; }

  auto channel(int c) const { return data_.middleCols(Index(c) * points_, points_); }

  Scalar value(Index p, int o) const { return data_(o, p); }
  Scalar grad(Index p, int o, int i) const {
    if (layout_.order < 1) throw std::logic_error("jet carries no first derivatives");
    return data_(o, Index(layout_.grad_channel(i)) * points_ + p);
  }
  Scalar hess(Index p, int o, int i, int j) const {
    int c = layout_.pair_channel(i, j);
    if (c < 0) throw std::logic_error("jet does not carry the requested second derivative");
    return data_(o, Index(c) * points_ + p);
  }

 private:
  JetLayout layout_;
  Index points_ = 0;
  Matrix<Scalar> data_;
};

template <typename Scalar>
Vector<Scalar> init_parameters(const NetworkShape& shape, std::uint64_t seed) {
  shape.validate();
  std::mt19937_64 rng(seed);
  Vector<Scalar> params = Vector<Scalar>::Zero(shape.parameter_count());
  for (int l = 0; l < shape.affine_layers(); ++l) {
    const double limit = std::sqrt(6.0 / double(shape.fan_in(l) + shape.fan_out(l)));
    std::uniform_real_distribution<double> glorot(-limit, limit);
    const Index begin = shape.weight_offset(l);
    const Index end = shape.bias_offset(l);
    for (Index k = begin; k < end; ++k) params[k] = Scalar(glorot(rng));
  }
  return params;
}

template <typename T>
class Mlp {
 public:
  using Scalar = T;

  // Intermediate state kept by forward() so backward() can run.
  struct Tape {
    JetLayout layout;
    Index points = 0;
    std::vector<Matrix<T>> activations;     // [0] is the input jet
    std::vector<Matrix<T>> preactivations;  // hidden layers only
  };

  explicit Mlp(NetworkShape shape) : shape_(shape) { shape_.validate(); }

  const NetworkShape& shape() const { return shape_; }
  Index parameter_count() const { return shape_.parameter_count(); }

  JetBatch<T> forward(const Vector<T>& params, const PointMatrix& points,
                      const JetLayout& layout, Tape* tape = nullptr) const {
    check(params, points, layout);
    const Index n = points.rows();
    const int channels = layout.channels();

    Matrix<T> a = Matrix<T>::Zero(shape_.input_dim, Index(channels) * n);
    a.leftCols(n) = points.transpose().template cast<T>();
    if (layout.order >= 1)
      for (int i = 0; i < shape_.input_dim; ++i)
        a.row(i).middleCols(Index(layout.grad_channel(i)) * n, n).setOnes();

    if (tape) {
      tape->layout = layout;
      tape->points = n;
      tape->activations.clear();
      tape->preactivations.clear();
    }

    for (int l = 0; l < shape_.affine_layers(); ++l) {
      auto w = weights(params, l);
      Matrix<T> z = w * a;
      z.leftCols(n).colwise() += bias(params, l);
      if (l == shape_.hidden_layers) {
        if (tape) tape->activations.push_back(std::move(a));
        return JetBatch<T>(layout, n, std::move(z));
      }
      Matrix<T> next = activate(z, layout, n);
      if (tape) {
        tape->activations.push_back(std::move(a));
        tape->preactivations.push_back(std::move(z));
      }
      a = std::move(next);
    }
    throw std::logic_error("unreachable");
  }

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output jet)
  // laid out like JetBatch::data().
  void backward(const Vector<T>& params, const Tape& tape, const Matrix<T>& adjoint,
                Vector<T>& grad) const {
    const Index n = tape.points;
    if (grad.size() != params.size()) grad = Vector<T>::Zero(params.size());
    Matrix<T> zbar = adjoint;
    for (int l = shape_.hidden_layers; l >= 0; --l) {
      const Matrix<T>& prev = tape.activations[l];
      const int rows = shape_.fan_out(l);
      const int cols = shape_.fan_in(l);
      Eigen::Map<Matrix<T>> gw(grad.data() + shape_.weight_offset(l), rows, cols);
      Eigen::Map<Vector<T>> gb(grad.data() + shape_.bias_offset(l), rows);
      gw.noalias() += zbar * prev.transpose();
      gb += zbar.leftCols(n).rowwise().sum();
      if (l == 0) break;
      Matrix<T> abar = weights(params, l).transpose() * zbar;
      zbar = activate_backward(tape.preactivations[l - 1], prev, abar, tape.layout, n);
    }
  }

 private:
  auto weights(const Vector<T>& params, int l) const {
    return Eigen::Map<const Matrix<T>>(params.data() + shape_.weight_offset(l),
                                        shape_.fan_out(l), shape_.fan_in(l));
  }
  auto bias(const Vector<T>& params, int l) const {
    return Eigen::Map<const Vector<T>>(params.data() + shape_.bias_offset(l),
                                        shape_.fan_out(l));
  }

  void check(const Vector<T>& params, const PointMatrix& points,
             const JetLayout& layout) const {
    if (params.size() != shape_.parameter_count())
      throw std::invalid_argument("parameter vector length does not match network shape");
    if (points.cols() != shape_.input_dim)
      throw std::invalid_argument("points must have " + std::to_string(shape_.input_dim) +
                                  " columns, got " + std::to_string(points.cols()));
    if (layout.input_dim != shape_.input_dim)
      throw std::invalid_argument("jet layout input dimension mismatch");
    if (!points.allFinite()) throw std::invalid_argument("non-finite input point");
  }

  // Eigen's double tanh is scalar libm. This is the Cephes split: a rational
  // form below 0.625 and 1 - 2 / (exp(2|z|) + 1) above, both vectorized.
  template <typename Expr>
  static Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> tanh_of(const Expr& z) {
    if constexpr (!std::is_same_v<T, double>) {
      return z.tanh();
    } else {
      using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic>;
      const Array x = z;
      const Array a = x.abs();
      const Array s = x.square();
      const Array p = ((-9.64399179425052238628e-1 * s - 9.92877231001918586564e1) * s -
                       1.61468768441708447952e3);
      const Array q = (((s + 1.12811678491632931402e2) * s + 2.23548839060100448583e3) * s +
                       4.84406305325125486048e3);
      const Array small = x + x * s * p / q;
      // Huge |z| saturates to exactly 1; NaN falls through to `big` and survives.
      const Array big = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
      return (a < 0.625).select(small, (x < 0.0).select(-big, big));
    }
  }

  // tanh applied to a jet: with t = tanh(z), s1 = t', s2 = t'',
  //   a = t,  a_i = s1 z_i,  a_ij = s2 z_i z_j + s1 z_ij.
  static Matrix<T> activate(const Matrix<T>& z, const JetLayout& layout, Index n) {
    Matrix<T> a(z.rows(), z.cols());
    auto t = a.leftCols(n).array();
    t = tanh_of(z.leftCols(n).array());
    if (layout.order == 0) return a;
    const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> s1 = T(1) - t.square();
    auto blk = [n](auto& m, int c) { return m.middleCols(Index(c) * n, n).array(); };
    const int d = layout.input_dim;
    for (int i = 0; i < d; ++i) blk(a, 1 + i) = s1 * blk(z, 1 + i);
    if (layout.order < 2) return a;
    const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic> s2 = T(-2) * t * s1;
    for (std::size_t p = 0; p < layout.pairs.size(); ++p) {
      const int c = 1 + d + int(p);
      const auto [i, j] = layout.pairs[p];
      blk(a, c) = s2 * blk(z, 1 + i) * blk(z, 1 + j) + s1 * blk(z, c);
    }
    return a;
  }

  static Matrix<T> activate_backward(const Matrix<T>& z, const Matrix<T>& a,
                                     const Matrix<T>& abar, const JetLayout& layout,
                                     Index n) {
    using Array = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>;
    auto blk = [n](auto& m, int c) { return m.middleCols(Index(c) * n, n).array(); };
    Matrix<T> zbar(z.rows(), z.cols());
    const Array t = a.leftCols(n).array();
    const Array s1 = T(1) - t.square();
    blk(zbar, 0) = s1 * blk(abar, 0);
    if (layout.order == 0) return zbar;

    const Array s2 = T(-2) * t * s1;
    const int d = layout.input_dim;
    for (int i = 0; i < d; ++i) {
      blk(zbar, 1 + i) = s1 * blk(abar, 1 + i);
      blk(zbar, 0) += s2 * blk(abar, 1 + i) * blk(z, 1 + i);
    }
    if (layout.order < 2) return zbar;

    const Array s3 = T(-2) * s1.square() + T(4) * t.square() * s1;
    for (std::size_t p = 0; p < layout.pairs.size(); ++p) {
      const int c = 1 + d + int(p);
      const auto [i, j] = layout.pairs[p];
      blk(zbar, c) = s1 * blk(abar, c);
      blk(zbar, 0) += blk(abar, c) * (s3 * blk(z, 1 + i) * blk(z, 1 + j) + s2 * blk(z, c));
      blk(zbar, 1 + i) += s2 * blk(abar, c) * blk(z, 1 + j);
      blk(zbar, 1 + j) += s2 * blk(abar, c) * blk(z, 1 + i);
    }
    return zbar;
  }

  NetworkShape shape_;
};

// Value and input derivatives of the network up to `order` (all second
// derivative pairs for order 2).
template <typename T>
JetBatch<T> evaluate_jets(const Vector<T>& params, const NetworkShape& shape,
                          const PointMatrix& points, int order) {
  if (order < 0 || order > 2) throw std::invalid_argument("jet order must be 0, 1 or 2");
  const JetLayout layout = order == 0   ? JetLayout::values(shape.input_dim)
                           : order == 1 ? JetLayout::first(shape.input_dim)
                                        : JetLayout::full(shape.input_dim);
  return Mlp<T>(shape).forward(params, points, layout);
}

}  // namespace tsonn
