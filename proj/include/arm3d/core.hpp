#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace arm3d {

/// Scalar used by every numerical component. Desk-scale sizes keep double
/// precision affordable and finite-difference checks reliable.
using Scalar = double;
using Index = Eigen::Index;

template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVectorT = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using Vector3T = Eigen::Matrix<T, 3, 1>;

using Matrix = MatrixT<Scalar>;
using RowVector = RowVectorT<Scalar>;
using Vector3 = Vector3T<Scalar>;

enum class Mode { train, eval };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Batch normalization in train mode needs at least two rows.
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

/// API misuse: empty tape, index out of range, mutually exclusive options.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value showed up in a gradient or loss term.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

inline void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace arm3d
