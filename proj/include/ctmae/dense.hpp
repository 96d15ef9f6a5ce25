#pragma once

#include <Eigen/Dense>

namespace ctmae {

// All dense math in the project runs on row-major Eigen matrices templated on
// the scalar: float in training, double in the gradient-check mode.
template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatXf = MatX<float>;
using MatXd = MatX<double>;

} // namespace ctmae
