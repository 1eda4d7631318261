#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "locov/covmodel.hpp"
#include "locov/locov.hpp"
#include "locov/random.hpp"
#include "oracles.hpp"

using namespace locov;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd diag(std::initializer_list<double> v) {
  VectorXd d(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

MatrixXd permute(const MatrixXd& cov, const std::vector<Index>& perm) {
  // out(a, b) = cov(perm[a], perm[b]): asset a of the result is asset perm[a] of the input.
  const Index p = cov.rows();
  MatrixXd out(p, p);
  for (Index a = 0; a < p; ++a)
    for (Index b = 0; b < p; ++b) out(a, b) = cov(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
  return out;
}

}  // namespace

TEST_CASE("subproblem_weights: diagonal blocks") {
  const Index pair[2] = {0, 1};
  const auto even = subproblem_weights(MatrixXd::Identity(2, 2), std::span<const Index>(pair, 2));
  REQUIRE(even);
  CHECK(std::abs((*even)(0) - 0.5) <= 1e-15);
  CHECK(std::abs((*even)(1) - 0.5) <= 1e-15);

  const auto skew = subproblem_weights(diag({1.0, 3.0}), std::span<const Index>(pair, 2));
  REQUIRE(skew);
  CHECK(std::abs((*skew)(0) - 0.75) <= 1e-15);
  CHECK(std::abs((*skew)(1) - 0.25) <= 1e-15);
}

TEST_CASE("subproblem_weights: 3x3 block matches the KKT oracle in index order") {
  RandomStream rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd cov = oracle::random_spd(5, rng);
    const std::vector<Index> idx{3, 0, 4};
    const auto got = subproblem_weights(cov, std::span<const Index>(idx));
    REQUIRE(got);
    MatrixXd block(3, 3);
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b) block(a, b) = cov(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    const auto qp = oracle::kkt_min_variance(block);
    CHECK((*got - qp.weights).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("subproblem_weights: singular block skips, bad indices throw") {
  const MatrixXd cov = MatrixXd::Ones(3, 3);
  const std::vector<Index> idx{0, 2};
  CHECK_FALSE(subproblem_weights(cov, std::span<const Index>(idx)).has_value());

  const MatrixXd eye = MatrixXd::Identity(3, 3);
  const std::vector<Index> one{1}, repeated{1, 1}, out_of_range{0, 3}, negative{-1, 0};
  CHECK_THROWS_AS(subproblem_weights(eye, std::span<const Index>(one)), InputError);
  CHECK_THROWS_AS(subproblem_weights(eye, std::span<const Index>(repeated)), InputError);
  CHECK_THROWS_AS(subproblem_weights(eye, std::span<const Index>(out_of_range)), InputError);
  CHECK_THROWS_AS(subproblem_weights(eye, std::span<const Index>(negative)), InputError);
}

TEST_CASE("locov2: identity gives uniform weights") {
  for (Index p = 2; p <= 12; ++p) {
    const auto res = locov2(MatrixXd::Identity(p, p));
    CHECK((res.weights - VectorXd::Constant(p, 1.0 / static_cast<double>(p))).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((res.votes - VectorXd::Constant(p, 0.5)).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("locov2: hand trace on diag(1, 3)") {
  const auto res = locov2(diag({1.0, 3.0}));
  const MatrixXd u_expected = (MatrixXd(2, 2) << 0.5, 0.75, 0.25, 0.5).finished();
  CHECK((res.relative_weights - u_expected).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(std::abs(res.votes(0) - 0.625) <= 1e-12);
  CHECK(std::abs(res.votes(1) - 0.375) <= 1e-12);
  CHECK(std::abs(res.weights(0) - 0.625) <= 1e-12);
  CHECK(std::abs(res.weights(1) - 0.375) <= 1e-12);
  CHECK(res.diagnostics.skipped_blocks == 0);
  CHECK(res.diagnostics.solved_blocks == 1);
}

TEST_CASE("locov2: diagonal covariance reproduces the closed-form votes") {
  RandomStream rng(41);
  std::uniform_real_distribution<double> u(0.5, 30.0);
  for (Index p : {3, 7, 30}) {
    VectorXd var(p);
    for (Index k = 0; k < p; ++k) var(k) = u(rng);
    const auto res = locov2(MatrixXd(var.asDiagonal()));
    const VectorXd want = oracle::locov2_diagonal_votes(var);
    CHECK((res.votes - want).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(res.weights.sum() - 1.0) <= 1e-10);
    for (Index i = 0; i < p; ++i) CHECK(res.votes(i) == doctest::Approx(res.relative_weights.row(i).mean()).epsilon(1e-12));
  }
}

TEST_CASE("locov2: scale invariance, permutation equivariance, sum to one") {
  RandomStream rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    const Index p = 3 + rep % 8;
    const MatrixXd cov = oracle::random_spd(p, rng);
    const auto base = locov2(cov);
    CHECK(std::abs(base.weights.sum() - 1.0) <= 1e-10);
    for (double c : {1e-3, 0.7, 42.0}) {
      const auto scaled = locov2(MatrixXd(c * cov));
      CHECK((scaled.weights - base.weights).cwiseAbs().maxCoeff() <= 1e-10);
    }
    std::vector<Index> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto moved = locov2(permute(cov, perm));
    for (Index a = 0; a < p; ++a)
      CHECK(std::abs(moved.weights(a) - base.weights(perm[static_cast<std::size_t>(a)])) <= 1e-12);
  }
}

TEST_CASE("locov2: duplicate asset pair is skipped") {
  // Assets 0 and 1 are identical; the (0, 1) block is singular.
  MatrixXd cov = diag({2.0, 2.0, 1.0});
  cov(0, 1) = cov(1, 0) = 2.0;
  const auto res = locov2(cov);
  CHECK(res.diagnostics.skipped_blocks == 1);
  CHECK(res.diagnostics.solved_blocks == 2);
  CHECK(res.relative_weights(0, 1) == 0.0);
  CHECK(res.relative_weights(1, 0) == 0.0);
  CHECK(std::abs(res.weights.sum() - 1.0) <= 1e-12);
  CHECK(std::abs(res.weights(0) - res.weights(1)) <= 1e-15);

  CHECK_THROWS_AS(locov2(MatrixXd::Ones(2, 2)), DegenerateAssetError);
}

TEST_CASE("locov2: input checks") {
  CHECK_THROWS_AS(locov2(MatrixXd::Identity(1, 1)), InputError);
  MatrixXd asym = MatrixXd::Identity(3, 3);
  asym(0, 1) = 0.3;
  CHECK_THROWS_AS(locov2(asym), InputError);
}

TEST_CASE("locovk: identity covariance stays uniform") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RandomStream rng(seed);
    const auto res = locovk(MatrixXd::Identity(9, 9), 3, rng);
    CHECK((res.weights - VectorXd::Constant(9, 1.0 / 9.0)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((res.relative_weights.array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-15);
    RandomStream rng2(seed);
    const auto rm = locovk_running_mean(MatrixXd::Identity(9, 9), 3, rng2);
    CHECK((rm.weights - VectorXd::Constant(9, 1.0 / 9.0)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("locovk: k = p forces every block to the full sample portfolio") {
  RandomStream rng(51);
  const MatrixXd cov = oracle::random_spd(4, rng);
  const VectorXd full = oracle::kkt_min_variance(cov).weights;
  const std::vector<Index> order{2, 0, 3, 1};
  const auto sub = subproblem_weights(cov, std::span<const Index>(order));
  REQUIRE(sub);
  for (Index t = 0; t < 4; ++t) CHECK(std::abs((*sub)(t) - full(order[static_cast<std::size_t>(t)])) <= 1e-10);

  const auto res = locovk(cov, 4, rng);
  CHECK(res.diagnostics.solved_blocks == 16);
  CHECK(res.diagnostics.skipped_blocks == 0);
  CHECK(res.diagnostics.resamples == 0);
  CHECK(std::abs(res.weights.sum() - 1.0) <= 1e-10);
}

TEST_CASE("locovk: halving versus running mean on repeated entries") {
  // p = k = 3 with one repetition per asset: every draw is the full set, so the
  // weight an asset receives is its full-portfolio weight regardless of order.
  const MatrixXd cov = diag({1.0, 2.0, 4.0});
  const VectorXd w = oracle::kkt_min_variance(cov).weights;
  const double a = 1.0 / 3.0;
  LocovkOptions opts;
  opts.repetitions = 1;
  RandomStream r1(0), r2(0);
  const auto halving = locovk(cov, 3, r1, opts);
  const auto running = locovk_running_mean(cov, 3, r2, opts);

  // U(0, 0): written once (asset 0's own draw).
  CHECK(std::abs(halving.relative_weights(0, 0) - 0.5 * (a + w(0))) <= 1e-15);
  CHECK(halving.relative_weights(0, 0) == running.relative_weights(0, 0));
  // U(1, 0): written by asset 0's draw, then by asset 1's own draw.
  CHECK(std::abs(halving.relative_weights(1, 0) - (0.25 * a + 0.25 * w(1) + 0.5 * w(1))) <= 1e-15);
  CHECK(std::abs(running.relative_weights(1, 0) - (a + 2.0 * w(1)) / 3.0) <= 1e-15);
}

TEST_CASE("locovk: reproducible under a fixed seed, seed-dependent otherwise") {
  RandomStream gen(61);
  const MatrixXd cov = oracle::random_spd(8, gen);
  RandomStream a(5), b(5), c(6);
  const auto ra = locovk(cov, 3, a);
  const auto rb = locovk(cov, 3, b);
  const auto rc = locovk(cov, 3, c);
  CHECK((ra.weights.array() == rb.weights.array()).all());
  CHECK((ra.relative_weights.array() == rb.relative_weights.array()).all());
  CHECK((ra.weights - rc.weights).cwiseAbs().maxCoeff() > 0.0);
  CHECK(std::abs(ra.weights.sum() - 1.0) <= 1e-10);
}

TEST_CASE("locovk: argument checks") {
  RandomStream rng(1);
  const MatrixXd eye = MatrixXd::Identity(5, 5);
  CHECK_THROWS_AS(locovk(eye, 2, rng), InputError);
  CHECK_THROWS_AS(locovk(eye, 6, rng), InputError);
  LocovkOptions bad;
  bad.repetitions = -1;
  CHECK_THROWS_AS(locovk(eye, 3, rng, bad), InputError);
}

TEST_CASE("locovk: singular blocks are resampled, then skipped") {
  // Assets 0..2 are identical, so any block made only of them is singular.
  MatrixXd cov = MatrixXd::Identity(4, 4);
  cov.topLeftCorner(3, 3).setOnes();
  RandomStream rng(3);
  const auto res = locovk(cov, 3, rng);
  CHECK(res.diagnostics.resamples > 0);
  CHECK(res.diagnostics.solved_blocks + res.diagnostics.skipped_blocks == 16);
  CHECK(res.relative_weights.allFinite());
  CHECK(std::abs(res.weights.sum() - 1.0) <= 1e-10);

  // With k = p every block is the full singular matrix.
  RandomStream rng2(3);
  const auto all_skipped = locovk(MatrixXd::Ones(3, 3), 3, rng2);
  CHECK(all_skipped.diagnostics.skipped_blocks == 9);
  CHECK(all_skipped.diagnostics.resamples == 90);
}

namespace {

// Mean locovk weight per asset over `seeds` streams, for cov and for a
// permuted copy mapped back to the original asset order.
struct EquivarianceStats {
  VectorXd mean_diff;
  VectorXd diff_se;
};

EquivarianceStats permuted_means(VoteUpdate update, int seeds) {
  RandomStream gen(71);
  const Index p = 6;
  const MatrixXd cov = oracle::random_spd(p, gen);
  const std::vector<Index> perm{4, 2, 0, 5, 1, 3};
  const MatrixXd moved = permute(cov, perm);
  VectorXd sum_a = VectorXd::Zero(p), sq_a = VectorXd::Zero(p);
  VectorXd sum_b = VectorXd::Zero(p), sq_b = VectorXd::Zero(p);
  LocovkOptions opts;
  opts.update = update;
  for (int s = 0; s < seeds; ++s) {
    RandomStream ra = make_stream(static_cast<std::uint64_t>(s), {0});
    RandomStream rb = make_stream(static_cast<std::uint64_t>(s), {1});
    const VectorXd wa = locovk(cov, 3, ra, opts).weights;
    const VectorXd wb_moved = locovk(moved, 3, rb, opts).weights;
    VectorXd wb(p);
    for (Index a = 0; a < p; ++a) wb(perm[static_cast<std::size_t>(a)]) = wb_moved(a);
    sum_a += wa;
    sq_a += wa.cwiseAbs2();
    sum_b += wb;
    sq_b += wb.cwiseAbs2();
  }
  const double m = seeds;
  EquivarianceStats out{VectorXd(p), VectorXd(p)};
  for (Index i = 0; i < p; ++i) {
    const double ma = sum_a(i) / m, mb = sum_b(i) / m;
    const double va = (sq_a(i) / m - ma * ma) / (m - 1.0);
    const double vb = (sq_b(i) / m - mb * mb) / (m - 1.0);
    out.mean_diff(i) = ma - mb;
    out.diff_se(i) = std::sqrt(va + vb);
  }
  return out;
}

}  // namespace

TEST_CASE("locovk running mean: statistical permutation equivariance") {
  const auto stats = permuted_means(VoteUpdate::running_mean, 400);
  for (Index i = 0; i < stats.mean_diff.size(); ++i) {
    CAPTURE(i);
    CHECK(std::abs(stats.mean_diff(i)) <= 3.0 * stats.diff_se(i));
  }
}

// The halving rule weights whichever write reaches a U cell last by 1/2, and
// whether an asset's own write or a foreign write lands last depends on the
// visiting order, so the halving variant carries a small order bias.
TEST_CASE("locovk halving: statistical permutation equivariance" * doctest::may_fail()) {
  const auto stats = permuted_means(VoteUpdate::halving, 400);
  for (Index i = 0; i < stats.mean_diff.size(); ++i) {
    CAPTURE(i);
    CHECK(std::abs(stats.mean_diff(i)) <= 3.0 * stats.diff_se(i));
  }
}
