#pragma once

// Low-dimension covariance voting. Small k x k blocks of the covariance
// have a much smaller feature-to-sample ratio than the full matrix, so their
// minimum-variance weights are accurate relative weights between the assets
// in the block. Each block solve votes into a p x p ledger U, and the final
// portfolio is the normalized vector of row means of U.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "locov/errors.hpp"
#include "locov/minvar.hpp"
#include "locov/types.hpp"

namespace locov {

struct LocovDiagnostics {
  std::size_t solved_blocks = 0;
  std::size_t skipped_blocks = 0;  // singular blocks left out of U
  std::size_t resamples = 0;       // LoCoV-k redraws after a singular block
};

template <typename Scalar>
struct LocovResult {
  PortfolioWeight<Scalar> weights;
  Matrix<Scalar> relative_weights;  // U
  Vector<Scalar> votes;             // V, row means of U
  LocovDiagnostics diagnostics;
};

enum class VoteUpdate {
  halving,       // U <- (u + U) / 2
  running_mean,  // U <- mean of the initial value and every weight assigned so far
};

struct LocovkOptions {
  Index repetitions = 0;  // draws per asset; 0 means p
  int max_resamples = 10;
  VoteUpdate update = VoteUpdate::halving;
};

namespace detail {

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& cov, const char* who) {
  using Scalar = typename Derived::Scalar;
  if (cov.rows() != cov.cols()) throw InputError(std::string(who) + ": covariance must be square");
  if (!cov.allFinite()) throw InputError(std::string(who) + ": covariance has non-finite entries");
  const Scalar scale = cov.cwiseAbs().maxCoeff();
  const Scalar asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(1e-10) * scale) throw InputError(std::string(who) + ": covariance is not symmetric");
}

template <typename Scalar>
PortfolioWeight<Scalar> normalize_votes(const Vector<Scalar>& votes) {
  const Scalar total = votes.sum();
  const Scalar tol = Scalar(1e-12) * votes.norm() * static_cast<Scalar>(votes.size());
  if (!(std::abs(total) > tol))
    throw AmbiguousPortfolioError("LoCoV votes sum to zero; sum-one portfolio undefined");
  return votes / total;
}

}  // namespace detail

/// Normalized minimum-variance weights of the block cov[index_set, index_set],
/// in index_set order. std::nullopt when the block is singular, which callers
/// treat as a skipped vote. Throws InputError for fewer than two, repeated or
/// out-of-range indices.
template <typename Derived>
std::optional<Vector<typename Derived::Scalar>> subproblem_weights(
    const Eigen::MatrixBase<Derived>& cov, std::span<const Index> index_set) {
  using Scalar = typename Derived::Scalar;
  const Index k = static_cast<Index>(index_set.size());
  if (k < 2) throw InputError("sub-problem needs at least two assets");
  for (std::size_t a = 0; a < index_set.size(); ++a) {
    if (index_set[a] < 0 || index_set[a] >= cov.rows())
      throw InputError("sub-problem index " + std::to_string(index_set[a]) + " out of range");
    for (std::size_t b = 0; b < a; ++b)
      if (index_set[a] == index_set[b])
        throw InputError("sub-problem index " + std::to_string(index_set[a]) + " repeated");
  }

  Matrix<Scalar> block(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) block(a, b) = cov(index_set[a], index_set[b]);

  try {
    return normalize(free_optimal_weight(block));
  } catch (const NonInvertibleError&) {
    return std::nullopt;
  } catch (const AmbiguousPortfolioError&) {
    return std::nullopt;
  }
}

/// LoCoV-2: U starts at I/2; every pair i < j writes its two-asset weights to
/// U(i,j) and U(j,i); V_i is the mean of row i and w = V / sum(V).
/// Deterministic. Singular pairs keep their initial entries.
template <typename Derived>
LocovResult<typename Derived::Scalar> locov2(const Eigen::MatrixBase<Derived>& cov) {
  using Scalar = typename Derived::Scalar;
  detail::require_symmetric(cov, "locov2");
  const Index p = cov.rows();
  if (p < 2) throw InputError("locov2 needs at least two assets");

  LocovResult<Scalar> out;
  Matrix<Scalar>& u = out.relative_weights;
  u = Scalar(0.5) * Matrix<Scalar>::Identity(p, p);
  std::vector<Index> solved_with(static_cast<std::size_t>(p), 0);

  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      const Index pair[2] = {i, j};
      const auto sub = subproblem_weights(cov, std::span<const Index>(pair, 2));
      if (!sub) {
        ++out.diagnostics.skipped_blocks;
        continue;
      }
      ++out.diagnostics.solved_blocks;
      ++solved_with[static_cast<std::size_t>(i)];
      ++solved_with[static_cast<std::size_t>(j)];
      u(i, j) = (*sub)(0);
      u(j, i) = (*sub)(1);
    }
  }
  for (Index i = 0; i < p; ++i)
    if (solved_with[static_cast<std::size_t>(i)] == 0)
      throw DegenerateAssetError("every pair containing asset " + std::to_string(i) + " is singular",
                                 static_cast<std::size_t>(i));

  out.votes = u.rowwise().mean();
  out.weights = detail::normalize_votes(out.votes);
  return out;
}

/// LoCoV-k: U starts at 1/k everywhere. For each asset i and each repetition
/// j, draw I = {i, l_1..l_{k-1}} with the l's a uniform subset of the other
/// assets, solve the block and update U(i, j) from u_0 and U(l_t, i) from u_t.
/// Votes are the row means of U after every asset's draws, so the result
/// does not depend on the order in which assets are visited.
/// A singular block is redrawn up to options.max_resamples times, then skipped.
template <typename Derived, typename Rng>
LocovResult<typename Derived::Scalar> locovk(const Eigen::MatrixBase<Derived>& cov, Index k,
                                             Rng& rng, const LocovkOptions& options = {}) {
  using Scalar = typename Derived::Scalar;
  detail::require_symmetric(cov, "locovk");
  const Index p = cov.rows();
  if (k < 3) throw InputError("locovk needs k >= 3 (use locov2 for pairs)");
  if (k > p) throw InputError("locovk needs k <= p");
  if (options.repetitions < 0) throw InputError("locovk repetitions must be non-negative");
  if (options.max_resamples < 0) throw InputError("locovk max_resamples must be non-negative");
  const Index reps = options.repetitions == 0 ? p : options.repetitions;

  LocovResult<Scalar> out;
  Matrix<Scalar>& u = out.relative_weights;
  u = Matrix<Scalar>::Constant(p, p, Scalar(1) / static_cast<Scalar>(k));
  Matrix<Scalar> counts;
  if (options.update == VoteUpdate::running_mean) counts = Matrix<Scalar>::Ones(p, p);
  auto assign = [&](Index r, Index c, Scalar w) {
    if (options.update == VoteUpdate::halving) {
      u(r, c) = Scalar(0.5) * w + Scalar(0.5) * u(r, c);
    } else {
      const Scalar seen = counts(r, c);
      u(r, c) = (u(r, c) * seen + w) / (seen + Scalar(1));
      counts(r, c) = seen + Scalar(1);
    }
  };

  std::vector<Index> others(static_cast<std::size_t>(p - 1));
  std::vector<Index> index_set(static_cast<std::size_t>(k));

  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < reps; ++j) {
      std::optional<Vector<Scalar>> sub;
      for (int attempt = 0; attempt <= options.max_resamples; ++attempt) {
        if (attempt > 0) ++out.diagnostics.resamples;
        // Partial Fisher-Yates over {0..p-1} \ {i}.
        for (Index a = 0, pos = 0; a < p; ++a)
          if (a != i) others[static_cast<std::size_t>(pos++)] = a;
        index_set[0] = i;
        for (Index t = 0; t < k - 1; ++t) {
          std::uniform_int_distribution<Index> pick(t, p - 2);
          std::swap(others[static_cast<std::size_t>(t)], others[static_cast<std::size_t>(pick(rng))]);
          index_set[static_cast<std::size_t>(t + 1)] = others[static_cast<std::size_t>(t)];
        }
        sub = subproblem_weights(cov, std::span<const Index>(index_set));
        if (sub) break;
      }
      if (!sub) {
        ++out.diagnostics.skipped_blocks;
        continue;
      }
      ++out.diagnostics.solved_blocks;
      assign(i, j % p, (*sub)(0));
      for (Index t = 1; t < k; ++t) assign(index_set[static_cast<std::size_t>(t)], i, (*sub)(t));
    }
  }
  out.votes = u.rowwise().mean();

  out.weights = detail::normalize_votes(out.votes);
  return out;
}

/// LoCoV-k where each U entry holds the exact mean of its initial value and
/// all weights assigned to it.
template <typename Derived, typename Rng>
LocovResult<typename Derived::Scalar> locovk_running_mean(const Eigen::MatrixBase<Derived>& cov,
                                                          Index k, Rng& rng,
                                                          LocovkOptions options = {}) {
  options.update = VoteUpdate::running_mean;
  return locovk(cov, k, rng, options);
}

}  // namespace locov
