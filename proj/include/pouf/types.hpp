#pragma once

#include <Eigen/Dense>

namespace pouf {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrixXd = RowMatrix<double>;
using RowMatrixXf = RowMatrix<float>;
using VectorXd = Vector<double>;

/// Guard added inside every log of a probability.
inline constexpr double kLogEps = 1e-8;

/// Rows with a smaller L2 norm are treated as corrupt and rejected by normalization.
inline constexpr double kMinRowNorm = 1e-12;

}  // namespace pouf
