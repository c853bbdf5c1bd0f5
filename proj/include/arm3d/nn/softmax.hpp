#pragma once

#include <Eigen/Core>

#include "arm3d/core.hpp"

namespace arm3d::nn {

/// Row-wise softmax with max subtraction.
template <typename Derived>
MatrixT<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& input) {
  using S = typename Derived::Scalar;
  MatrixT<S> out = input;
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const S peak = row.maxCoeff();
    row = (row.array() - peak).exp().matrix();
    row /= row.sum();
  }
  return out;
}

/// Backward of softmax_rows given its output: dx = y * (dy - <dy, y>).
template <typename DerivedY, typename DerivedG>
MatrixT<typename DerivedY::Scalar> softmax_rows_backward(const Eigen::MatrixBase<DerivedY>& output,
                                                         const Eigen::MatrixBase<DerivedG>& output_grad) {
  using S = typename DerivedY::Scalar;
  MatrixT<S> grad(output.rows(), output.cols());
  for (Index r = 0; r < output.rows(); ++r) {
    const S inner = output.row(r).dot(output_grad.row(r));
    grad.row(r) = output.row(r).cwiseProduct((output_grad.row(r).array() - inner).matrix());
  }
  return grad;
}

/// Index of the row maximum; ties resolve to the lowest index.
template <typename Derived>
Index argmax_row(const Eigen::MatrixBase<Derived>& m, Index row) {
  Index best = 0;
  for (Index c = 1; c < m.cols(); ++c) {
    if (m(row, c) > m(row, best)) best = c;
  }
  return best;
}

}  // namespace arm3d::nn
