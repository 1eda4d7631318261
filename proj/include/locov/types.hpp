#pragma once

#include <Eigen/Dense>

namespace locov {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Sum-one weight vector. Entries may be negative.
template <typename Scalar>
using PortfolioWeight = Vector<Scalar>;

}  // namespace locov
