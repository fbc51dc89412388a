#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace stabdom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Complex = std::complex<double>;

}  // namespace stabdom
