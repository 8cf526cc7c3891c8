#pragma once

// Row-invariant dense kernels.
//
// Every output element is accumulated in a fixed order that does not depend
// on the number of rows in the batch, and transcendental functions go through
// the scalar std:: path. A row evaluated alone therefore produces the same
// bits as the same row evaluated inside any batch, which is what makes shape
// tables an exact export of the model.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "addhaz/errors.hpp"

namespace addhaz {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Upper clip of the ExU activation.
inline constexpr double kExuCeiling = 1.0;

namespace kernels {

inline constexpr Eigen::Index kRowBlock = 256;

/// `x * w^T + 1 b^T` with `x` (n x in), `w` (out x in), `b` (out).
template <typename DX, typename DW, typename DB>
MatrixX<typename DX::Scalar> affine(const Eigen::MatrixBase<DX>& x,
                                    const Eigen::MatrixBase<DW>& w,
                                    const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DX::Scalar;
  const Eigen::Index n = x.rows();
  const Eigen::Index in = w.cols();
  const Eigen::Index out = w.rows();
  if (x.cols() != in || b.size() != out) {
    throw ShapeError("affine: input has " + std::to_string(x.cols()) +
                     " columns, layer expects " + std::to_string(in));
  }
  MatrixX<Scalar> y(n, out);
  for (Eigen::Index r0 = 0; r0 < n; r0 += kRowBlock) {
    const Eigen::Index len = std::min(kRowBlock, n - r0);
    for (Eigen::Index o = 0; o < out; ++o) {
      auto col = y.col(o).segment(r0, len);
      col.setConstant(b(o));
      for (Eigen::Index i = 0; i < in; ++i) {
        col += w(o, i) * x.col(i).segment(r0, len);
      }
    }
  }
  return y;
}

/// Pre-activation of an ExU layer: `(x - 1 b^T) * exp(w)^T` with `w`
/// (out x in), `b` (in).
template <typename DX, typename DW, typename DB>
MatrixX<typename DX::Scalar> exu_preactivation(const Eigen::MatrixBase<DX>& x,
                                               const Eigen::MatrixBase<DW>& w,
                                               const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DX::Scalar;
  if (x.cols() != w.cols() || b.size() != w.cols()) {
    throw ShapeError("exu: input has " + std::to_string(x.cols()) +
                     " columns, layer expects " + std::to_string(w.cols()));
  }
  const MatrixX<Scalar> scale = w.unaryExpr([](Scalar v) { return std::exp(v); });
  MatrixX<Scalar> centered = x;
  for (Eigen::Index i = 0; i < x.cols(); ++i) centered.col(i).array() -= b(i);
  return affine(centered, scale, VectorX<Scalar>::Zero(w.rows()));
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.cwiseMax(Scalar(0));
}

template <typename Derived>
auto clip_unit(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.cwiseMax(Scalar(0)).cwiseMin(Scalar(kExuCeiling));
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
}

}  // namespace kernels

/// Elementwise ExU unit `clip(exp(w) * (x - b), 0, 1)`.
template <typename DW, typename DB, typename DX>
VectorX<typename DX::Scalar> apply_exu(const Eigen::MatrixBase<DW>& w,
                                       const Eigen::MatrixBase<DB>& b,
                                       const Eigen::MatrixBase<DX>& x) {
  using Scalar = typename DX::Scalar;
  if (w.size() != x.size() || b.size() != x.size()) {
    throw ShapeError("apply_exu: w, b and x must have the same length");
  }
  VectorX<Scalar> y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar v = std::exp(w(i)) * (x(i) - b(i));
    y(i) = std::clamp(v, Scalar(0), Scalar(kExuCeiling));
  }
  return y;
}

}  // namespace addhaz
