#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace locov {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatch, bad indices, invalid config.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Input too small to carry the requested statistic (e.g. centering n < 2).
class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

/// Covariance fails the relative smallest-eigenvalue threshold.
class NonInvertibleError : public Error {
 public:
  NonInvertibleError(const std::string& what, double relative_min_eigenvalue)
      : Error(what), relative_min_eigenvalue_(relative_min_eigenvalue) {}

  /// lambda_min / lambda_max of the rejected matrix.
  double relative_min_eigenvalue() const noexcept { return relative_min_eigenvalue_; }

 private:
  double relative_min_eigenvalue_;
};

/// The free weight sums to (numerically) zero, so sum-one scaling is undefined.
class AmbiguousPortfolioError : public Error {
 public:
  using Error::Error;
};

/// Every LoCoV sub-problem touching an asset was singular.
class DegenerateAssetError : public Error {
 public:
  DegenerateAssetError(const std::string& what, std::size_t asset)
      : Error(what), asset_(asset) {}

  std::size_t asset() const noexcept { return asset_; }

 private:
  std::size_t asset_;
};

}  // namespace locov
