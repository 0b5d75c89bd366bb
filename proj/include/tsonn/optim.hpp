#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "tsonn/types.hpp"

namespace tsonn {

enum class StepStatus { ok, refused, stalled };

// Loss and gradient at a point: returns f and writes the gradient.
template <typename T>
using Evaluator = std::function<T(const Vector<T>&, Vector<T>&)>;

template <typename T>
struct AdamSettings {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamSettings<T> s = {}) : s_(s) {}

  const AdamSettings<T>& settings() const { return s_; }
  const Vector<T>& first_moment() const { return m_; }
  const Vector<T>& second_moment() const { return v_; }
  long steps() const { return t_; }

  // Bias-corrected update; refuses non-finite gradients.
  StepStatus step(Vector<T>& params, const Vector<T>& grad) {
    if (grad.size() != params.size()) throw std::invalid_argument("adam: gradient size mismatch");
    if (!grad.allFinite()) return StepStatus::refused;
    if (m_.size() != params.size()) {
      m_ = Vector<T>::Zero(params.size());
      v_ = Vector<T>::Zero(params.size());
    }
    ++t_;
    m_ = s_.beta1 * m_ + (T(1) - s_.beta1) * grad;
    v_ = s_.beta2 * v_ + (T(1) - s_.beta2) * grad.cwiseAbs2();
    const T c1 = T(1) - T(std::pow(double(s_.beta1), double(t_)));
    const T c2 = T(1) - T(std::pow(double(s_.beta2), double(t_)));
    params.array() -= s_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + s_.eps);
    return StepStatus::ok;
  }

  void reset() {
    m_.setZero();
    v_.setZero();
    t_ = 0;
  }

 private:
  AdamSettings<T> s_;
  Vector<T> m_, v_;
  long t_ = 0;
};

// Plain gradient descent, theta <- theta - lr * grad.
template <typename T>
class GradientDescent {
 public:
  explicit GradientDescent(T lr) : lr_(lr) {}
  StepStatus step(Vector<T>& params, const Vector<T>& grad) {
    if (!grad.allFinite()) return StepStatus::refused;
    params -= lr_ * grad;
    return StepStatus::ok;
  }
  void reset() {}
  T lr() const { return lr_; }

 private:
  T lr_;
};

template <typename T>
struct LbfgsSettings {
  int memory = 50;
  T c1 = T(1e-4);
  T c2 = T(0.9);
  int max_trials = 25;
};

// Limited-memory BFGS with a strong-Wolfe line search. An empty history gives
// the steepest-descent direction with a unit initial step.
template <typename T>
class Lbfgs {
 public:
  struct Pair {
    Vector<T> s, y;
    T rho;
  };

  explicit Lbfgs(LbfgsSettings<T> s = {}) : s_(s) {
    if (s_.memory < 1) throw std::invalid_argument("lbfgs memory must be >= 1");
  }

  const LbfgsSettings<T>& settings() const { return s_; }
  std::size_t history_size() const { return history_.size(); }
  const std::deque<Pair>& history() const { return history_; }
  const Vector<T>& last_direction() const { return direction_; }
  T last_step_length() const { return alpha_; }
  int last_evaluations() const { return evaluations_; }

  void reset() { history_.clear(); }

  // Search direction -H g from the two-loop recursion.
  Vector<T> direction(const Vector<T>& g) const {
    Vector<T> q = -g;
    if (history_.empty()) return q;
    std::vector<T> a(history_.size());
    for (std::size_t k = history_.size(); k-- > 0;) {
      a[k] = history_[k].rho * history_[k].s.dot(q);
      q -= a[k] * history_[k].y;
    }
    const Pair& last = history_.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
    for (std::size_t k = 0; k < history_.size(); ++k) {
      const T b = history_[k].rho * history_[k].y.dot(q);
      q += (a[k] - b) * history_[k].s;
    }
    return q;
  }

  // One accepted iteration. On entry (f, g) are the loss and gradient at x;
  // on exit they describe the new x.
  StepStatus step(Vector<T>& x, T& f, Vector<T>& g, const Evaluator<T>& eval) {
    if (!g.allFinite() || !std::isfinite(double(f))) return StepStatus::refused;
    evaluations_ = 0;
    direction_ = direction(g);
    T slope = g.dot(direction_);
    if (!(slope < T(0))) {
      history_.clear();
      direction_ = -g;
      slope = -g.squaredNorm();
    }
    if (slope == T(0)) return StepStatus::stalled;

    Vector<T> x_new, g_new;
    T f_new;
    if (!wolfe_search(x, f, slope, eval, x_new, f_new, g_new)) {
      // Steepest-descent fallback with Armijo backtracking.
      history_.clear();
      direction_ = -g;
      slope = -g.squaredNorm();
      if (!backtrack(x, f, slope, eval, x_new, f_new, g_new)) return StepStatus::stalled;
    }

    Vector<T> s = x_new - x;
    Vector<T> y = g_new - g;
    const T sy = s.dot(y);
    if (sy > std::numeric_limits<T>::epsilon() * y.squaredNorm() && sy > T(0)) {
      history_.push_back({std::move(s), std::move(y), T(1) / sy});
      if (int(history_.size()) > s_.memory) history_.pop_front();
    }
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);
    return StepStatus::ok;
  }

 private:
  T probe(const Vector<T>& x, T alpha, const Evaluator<T>& eval, Vector<T>& xa, Vector<T>& ga) {
    xa = x + alpha * direction_;
    ++evaluations_;
    T fa = eval(xa, ga);
    if (!std::isfinite(double(fa)) || !ga.allFinite()) fa = std::numeric_limits<T>::infinity();
    return fa;
  }

  static T interpolate(T a_lo, T f_lo, T d_lo, T a_hi, T f_hi, T d_hi) {
    // Minimizer of the cubic through both end points; bisection if unusable.
    const T lo = std::min(a_lo, a_hi);
    const T hi = std::max(a_lo, a_hi);
    if (std::isfinite(double(f_hi)) && std::isfinite(double(d_hi))) {
      const T d1 = d_lo + d_hi - T(3) * (f_lo - f_hi) / (a_lo - a_hi);
      const T disc = d1 * d1 - d_lo * d_hi;
      if (disc >= T(0)) {
        const T d2 = std::copysign(std::sqrt(disc), double(a_hi - a_lo));
        const T a = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / (d_hi - d_lo + T(2) * d2);
        const T margin = T(0.1) * (hi - lo);
        if (std::isfinite(double(a)) && a > lo + margin && a < hi - margin) return a;
      }
    }
    return T(0.5) * (lo + hi);
  }

  bool wolfe_search(const Vector<T>& x, T f0, T slope0, const Evaluator<T>& eval,
                    Vector<T>& x_out, T& f_out, Vector<T>& g_out) {
    T a_prev = T(0), f_prev = f0, d_prev = slope0;
    T alpha = T(1);
    Vector<T> xa, ga;
    for (int trial = 0; trial < s_.max_trials; ++trial) {
      const T fa = probe(x, alpha, eval, xa, ga);
      const T da = std::isfinite(double(fa)) ? ga.dot(direction_)
                                             : std::numeric_limits<T>::quiet_NaN();
      if (fa > f0 + s_.c1 * alpha * slope0 || (trial > 0 && fa >= f_prev))
        return zoom(x, f0, slope0, a_prev, f_prev, d_prev, alpha, fa, da, eval, s_.max_trials - trial - 1,
                    x_out, f_out, g_out);
      if (std::abs(da) <= -s_.c2 * slope0) {
        alpha_ = alpha;
        x_out = std::move(xa);
        f_out = fa;
        g_out = std::move(ga);
        return true;
      }
      if (da >= T(0))
        return zoom(x, f0, slope0, alpha, fa, da, a_prev, f_prev, d_prev, eval,
                    s_.max_trials - trial - 1, x_out, f_out, g_out);
      a_prev = alpha;
      f_prev = fa;
      d_prev = da;
      alpha *= T(2);
    }
    return false;
  }

  bool zoom(const Vector<T>& x, T f0, T slope0, T a_lo, T f_lo, T d_lo, T a_hi, T f_hi, T d_hi,
            const Evaluator<T>& eval, int budget, Vector<T>& x_out, T& f_out, Vector<T>& g_out) {
    Vector<T> xa, ga;
    // Best Armijo point seen so far, accepted if the curvature test never passes.
    bool have_lo = a_lo > T(0);
    for (int trial = 0; trial < budget; ++trial) {
      const T alpha = interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi);
      const T fa = probe(x, alpha, eval, xa, ga);
      const T da = std::isfinite(double(fa)) ? ga.dot(direction_)
                                             : std::numeric_limits<T>::quiet_NaN();
      if (fa > f0 + s_.c1 * alpha * slope0 || fa >= f_lo) {
        a_hi = alpha;
        f_hi = fa;
        d_hi = da;
      } else {
        if (std::abs(da) <= -s_.c2 * slope0) {
          alpha_ = alpha;
          x_out = std::move(xa);
          f_out = fa;
          g_out = std::move(ga);
          return true;
        }
        if (da * (a_hi - a_lo) >= T(0)) {
          a_hi = a_lo;
          f_hi = f_lo;
          d_hi = d_lo;
        }
        a_lo = alpha;
        f_lo = fa;
        d_lo = da;
        have_lo = true;
      }
      if (std::abs(a_hi - a_lo) <= std::numeric_limits<T>::epsilon() * std::max(a_lo, a_hi))
        break;
    }
    if (have_lo) {
      // Sufficient decrease holds at a_lo even though curvature does not.
      const T fa = probe(x, a_lo, eval, xa, ga);
      if (fa <= f0 + s_.c1 * a_lo * slope0) {
        alpha_ = a_lo;
        x_out = std::move(xa);
        f_out = fa;
        g_out = std::move(ga);
        return true;
      }
    }
    return false;
  }

  bool backtrack(const Vector<T>& x, T f0, T slope0, const Evaluator<T>& eval, Vector<T>& x_out,
                 T& f_out, Vector<T>& g_out) {
    T alpha = T(1) / std::max(T(1), std::sqrt(-slope0));
    Vector<T> xa, ga;
    for (int trial = 0; trial < 2 * s_.max_trials; ++trial, alpha *= T(0.5)) {
      const T fa = probe(x, alpha, eval, xa, ga);
      if (fa <= f0 + s_.c1 * alpha * slope0) {
        alpha_ = alpha;
        x_out = std::move(xa);
        f_out = fa;
        g_out = std::move(ga);
        return true;
      }
    }
    return false;
  }

  LbfgsSettings<T> s_;
  std::deque<Pair> history_;
  Vector<T> direction_;
  T alpha_ = T(0);
  int evaluations_ = 0;
};

}  // namespace tsonn
