// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace densreach {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace densreach
