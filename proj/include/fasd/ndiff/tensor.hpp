#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fasd {

/// Dense row-major matrix. Every tensor in the pipeline is rank <= 2, so the
/// Eigen dynamic matrix is the tensor type; shape is (rows, cols).
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Tensor = Mat<double>;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const std::string& what)
      : std::invalid_argument(op + ": " + what), op_(op) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Scalar>
std::string shape_str(const Mat<Scalar>& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

}  // namespace fasd
