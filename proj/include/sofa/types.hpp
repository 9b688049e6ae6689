#pragma once

#include <Eigen/Core>

namespace sofa {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-agent currency or fraction vector, indexed like Community::agents().
using Vector = VectorX<double>;

}  // namespace sofa
