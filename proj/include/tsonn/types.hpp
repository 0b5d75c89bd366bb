#pragma once

#include <Eigen/Dense>

namespace tsonn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Points are always stored one per row; columns are the input coordinates.
using PointMatrix = Eigen::MatrixXd;

}  // namespace tsonn
