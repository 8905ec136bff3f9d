// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace mwgnn {

/// Dense row-major double matrix. Row-major keeps node rows contiguous,
/// which is what the gather/scatter kernels walk.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace mwgnn
