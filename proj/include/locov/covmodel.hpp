#pragma once

// Ground-truth covariance models Sigma = P^T D^2 P, synthetic returns
// X = N D P and the sample covariance X^T X / n.

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "locov/errors.hpp"
#include "locov/types.hpp"

namespace locov {

/// Smallest eigenvalue / largest eigenvalue at or below this marks a
/// covariance as singular.
inline constexpr double kDegeneracyTolerance = 1e-10;

enum class NoiseDistribution { gaussian, rademacher, uniform };

/// Covariance factorization Sigma = P^T diag(sds)^2 P.
template <typename Scalar>
class SpectralModel {
 public:
  /// Throws InputError unless p >= 2, every sd > 0 and P is orthogonal
  /// (max |P^T P - I| <= 1e-10).
  SpectralModel(Vector<Scalar> eigen_sds, Matrix<Scalar> basis)
      : eigen_sds_(std::move(eigen_sds)), basis_(std::move(basis)) {
    const Index p = eigen_sds_.size();
    if (p < 2) throw InputError("spectral model needs dim >= 2");
    if (basis_.rows() != p || basis_.cols() != p)
      throw InputError("basis must be " + std::to_string(p) + "x" + std::to_string(p));
    for (Index k = 0; k < p; ++k)
      if (!(eigen_sds_(k) > Scalar(0)) || !std::isfinite(static_cast<double>(eigen_sds_(k))))
        throw InputError("eigen standard deviations must be positive and finite");
    const Scalar drift =
        (basis_.transpose() * basis_ - Matrix<Scalar>::Identity(p, p)).cwiseAbs().maxCoeff();
    if (drift > Scalar(1e-10)) throw InputError("basis is not orthogonal");
  }

  /// Model with basis P = I.
  static SpectralModel diagonal(Vector<Scalar> eigen_sds) {
    const Index p = eigen_sds.size();
    return SpectralModel(std::move(eigen_sds), Matrix<Scalar>::Identity(p, p));
  }

  Index dim() const noexcept { return eigen_sds_.size(); }
  const Vector<Scalar>& eigen_sds() const noexcept { return eigen_sds_; }
  const Matrix<Scalar>& basis() const noexcept { return basis_; }

 private:
  Vector<Scalar> eigen_sds_;
  Matrix<Scalar> basis_;
};

/// n x p return observations; rows are samples, columns assets.
template <typename Scalar>
struct ReturnMatrix {
  Matrix<Scalar> entries;
  bool centered = false;

  Index n_samples() const noexcept { return entries.rows(); }
  Index dim() const noexcept { return entries.cols(); }
};

/// P^T D^2 P, symmetrized.
template <typename Scalar>
Matrix<Scalar> build_covariance(const SpectralModel<Scalar>& model) {
  const Matrix<Scalar>& basis = model.basis();
  Matrix<Scalar> cov =
      basis.transpose() * model.eigen_sds().array().square().matrix().asDiagonal() * basis;
  return Scalar(0.5) * (cov + cov.transpose());
}

/// Haar-distributed orthogonal p x p matrix: QR of an i.i.d. Gaussian matrix
/// with sign(R_ii) folded into the columns of Q.
template <typename Scalar, typename Rng>
Matrix<Scalar> sample_haar_orthogonal(Index p, Rng& rng) {
  if (p < 1) throw InputError("Haar sampling needs p >= 1");
  std::normal_distribution<Scalar> gauss(Scalar(0), Scalar(1));
  Matrix<Scalar> z(p, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < p; ++i) z(i, j) = gauss(rng);

  Eigen::HouseholderQR<Matrix<Scalar>> qr(z);
  Matrix<Scalar> q = qr.householderQ();
  const Matrix<Scalar>& r = qr.matrixQR();
  for (Index j = 0; j < p; ++j)
    if (r(j, j) < Scalar(0)) q.col(j) = -q.col(j);
  return q;
}

/// Mean-zero, unit-variance draw from the chosen family.
template <typename Scalar, typename Rng>
Scalar standard_noise(NoiseDistribution dist, Rng& rng) {
  switch (dist) {
    case NoiseDistribution::rademacher: {
      std::bernoulli_distribution coin(0.5);
      return coin(rng) ? Scalar(1) : Scalar(-1);
    }
    case NoiseDistribution::uniform: {
      const Scalar half_width = std::sqrt(Scalar(3));
      std::uniform_real_distribution<Scalar> u(-half_width, half_width);
      return u(rng);
    }
    case NoiseDistribution::gaussian:
    default: {
      std::normal_distribution<Scalar> gauss(Scalar(0), Scalar(1));
      return gauss(rng);
    }
  }
}

/// X = N D P with N an n x p matrix of i.i.d. standardized noise.
/// The result is population-centered only; no sample-mean removal.
template <typename Scalar, typename Rng>
ReturnMatrix<Scalar> sample_returns(const SpectralModel<Scalar>& model, Index n,
                                    NoiseDistribution dist, Rng& rng) {
  if (n < 1) throw InputError("sample_returns needs n >= 1");
  const Index p = model.dim();
  Matrix<Scalar> noise(n, p);
  // Row-major fill so a stream prefix always maps to the same leading rows.
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) noise(i, j) = standard_noise<Scalar>(dist, rng);
  ReturnMatrix<Scalar> out;
  out.entries = (noise * model.eigen_sds().asDiagonal()) * model.basis();
  out.centered = false;
  return out;
}

/// Subtracts each column's sample mean.
template <typename Scalar>
ReturnMatrix<Scalar> center_returns(const ReturnMatrix<Scalar>& x) {
  if (x.n_samples() < 2) throw DegenerateInputError("centering needs at least 2 samples");
  ReturnMatrix<Scalar> out;
  out.entries = x.entries.rowwise() - x.entries.colwise().mean();
  out.centered = true;
  return out;
}

/// X^T X / n (divisor n).
template <typename Scalar>
Matrix<Scalar> sample_covariance(const ReturnMatrix<Scalar>& x) {
  const Index n = x.n_samples();
  if (n < 1) throw InputError("sample covariance of an empty return matrix");
  Matrix<Scalar> cov = Matrix<Scalar>::Zero(x.dim(), x.dim());
  cov.template selfadjointView<Eigen::Lower>().rankUpdate(x.entries.transpose(),
                                                          Scalar(1) / Scalar(n));
  cov.template triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return cov;
}

/// lambda_min / lambda_max of a symmetric matrix; -inf when lambda_max <= 0.
template <typename Derived>
typename Derived::Scalar relative_min_eigenvalue(const Eigen::MatrixBase<Derived>& cov) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> m = cov;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) return -std::numeric_limits<Scalar>::infinity();
  const Scalar hi = eig.eigenvalues().maxCoeff();
  if (!(hi > Scalar(0))) return -std::numeric_limits<Scalar>::infinity();
  return eig.eigenvalues().minCoeff() / hi;
}

template <typename Derived>
bool is_invertible(const Eigen::MatrixBase<Derived>& cov) {
  return relative_min_eigenvalue(cov) > typename Derived::Scalar(kDegeneracyTolerance);
}

}  // namespace locov
