#pragma once

#include <algorithm>
#include <cmath>

#include "tsonn/types.hpp"

namespace tsonn::test {

// |a - b| <= tol * max(|a|, |b|, floor)
inline bool rel_close(double a, double b, double tol, double floor = 1e-3) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), floor});
}

// Central-difference gradient of a scalar function of a parameter vector.
template <typename F>
Vector<double> central_gradient(F&& f, const Vector<double>& x, double h) {
  Vector<double> g(x.size());
  Vector<double> y = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = y[i];
    y[i] = xi + h;
    const double fp = f(y);
    y[i] = xi - h;
    const double fm = f(y);
    y[i] = xi;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// Max-norm error relative to the max-norm of the reference.
inline double max_rel_error(const Vector<double>& got, const Vector<double>& ref) {
  const double scale = std::max(ref.cwiseAbs().maxCoeff(), 1e-300);
  return (got - ref).cwiseAbs().maxCoeff() / scale;
}

}  // namespace tsonn::test
