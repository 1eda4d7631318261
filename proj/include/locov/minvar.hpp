#pragma once

// Closed-form minimum-variance portfolio:
//   S = cov^{-1} 1,   w* = S / sum(S),   R(w*) = 1 / sum(S).

#include <cmath>
#include <sstream>

#include "locov/covmodel.hpp"
#include "locov/errors.hpp"
#include "locov/types.hpp"

namespace locov {

/// Unnormalized solution S of cov * S = 1 and its signed sum.
template <typename Scalar>
struct FreeWeight {
  Vector<Scalar> values;
  Scalar signed_sum = Scalar(0);

  FreeWeight() = default;
  explicit FreeWeight(Vector<Scalar> v) : values(std::move(v)), signed_sum(values.sum()) {}
};

/// |sum(S)| at or below this is treated as a zero sum.
template <typename Scalar>
Scalar normalization_tolerance(const FreeWeight<Scalar>& s) {
  return Scalar(1e-12) * s.values.norm() * static_cast<Scalar>(s.values.size());
}

/// Solves cov * S = 1 by Cholesky. Throws NonInvertibleError when
/// lambda_min / lambda_max <= kDegeneracyTolerance.
template <typename Derived>
FreeWeight<typename Derived::Scalar> free_optimal_weight(const Eigen::MatrixBase<Derived>& cov) {
  using Scalar = typename Derived::Scalar;
  if (cov.rows() != cov.cols() || cov.rows() < 1)
    throw InputError("covariance must be a non-empty square matrix");
  const Matrix<Scalar> m = cov;
  if (!m.allFinite()) throw NonInvertibleError("covariance has non-finite entries", 0.0);

  const Scalar rel = relative_min_eigenvalue(m);
  if (!(rel > Scalar(kDegeneracyTolerance))) {
    std::ostringstream msg;
    msg << "covariance is not invertible (lambda_min/lambda_max = " << rel << ")";
    throw NonInvertibleError(msg.str(), static_cast<double>(rel));
  }

  Eigen::LLT<Matrix<Scalar>> llt(m);
  if (llt.info() != Eigen::Success)
    throw NonInvertibleError("Cholesky factorization failed", static_cast<double>(rel));
  return FreeWeight<Scalar>(llt.solve(Vector<Scalar>::Ones(m.rows())));
}

/// w = S / sum(S). Throws AmbiguousPortfolioError when the sum vanishes.
template <typename Scalar>
PortfolioWeight<Scalar> normalize(const FreeWeight<Scalar>& s) {
  if (!(std::abs(s.signed_sum) > normalization_tolerance(s)))
    throw AmbiguousPortfolioError("free weight sums to zero; sum-one portfolio undefined");
  return s.values / s.signed_sum;
}

/// R(w*) = 1 / sum(S). Requires a positive sum.
template <typename Scalar>
Scalar optimal_risk(const FreeWeight<Scalar>& s) {
  if (!(s.signed_sum > normalization_tolerance(s)))
    throw AmbiguousPortfolioError("free weight sum is not positive; risk undefined");
  return Scalar(1) / s.signed_sum;
}

/// w^T cov w.
template <typename DerivedW, typename DerivedC>
typename DerivedW::Scalar portfolio_risk(const Eigen::MatrixBase<DerivedW>& w,
                                         const Eigen::MatrixBase<DerivedC>& cov) {
  if (cov.rows() != cov.cols() || w.size() != cov.rows())
    throw InputError("weight/covariance dimension mismatch");
  return w.dot(cov * w);
}

/// normalize(free_optimal_weight(cov)).
template <typename Derived>
PortfolioWeight<typename Derived::Scalar> min_variance_weights(
    const Eigen::MatrixBase<Derived>& cov) {
  return normalize(free_optimal_weight(cov));
}

}  // namespace locov
