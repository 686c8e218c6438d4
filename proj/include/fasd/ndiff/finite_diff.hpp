#pragma once

#include "fasd/ndiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fasd::ndiff {

/// Central-difference gradient of a scalar function of one tensor.
template <typename Scalar, typename F>
Mat<Scalar> finite_diff_grad(F&& f, Mat<Scalar> x, Scalar h) {
  if (!(h > Scalar(0))) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Mat<Scalar> g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar x0 = x.data()[i];
    x.data()[i] = x0 + h;
    const Scalar fp = f(static_cast<const Mat<Scalar>&>(x));
    x.data()[i] = x0 - h;
    const Scalar fm = f(static_cast<const Mat<Scalar>&>(x));
    x.data()[i] = x0;
    g.data()[i] = (fp - fm) / (Scalar(2) * h);
  }
  return g;
}

/// Largest coordinate-wise relative error, with denominators floored at
/// `floor` so near-zero gradients are compared absolutely.
template <typename Scalar>
Scalar max_relative_error(const Mat<Scalar>& a, const Mat<Scalar>& b, Scalar floor = Scalar(1e-3)) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("max_relative_error", "shape mismatch");
  Scalar worst = Scalar(0);
  for (Index i = 0; i < a.size(); ++i) {
    const Scalar x = a.data()[i], y = b.data()[i];
    const Scalar denom = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

}  // namespace fasd::ndiff
