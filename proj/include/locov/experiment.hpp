#pragma once

// Monte Carlo harness: draw sample covariances from a fixed ground truth,
// run estimators, and aggregate weight and risk errors against the exact
// minimum-variance portfolio.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "locov/covmodel.hpp"
#include "locov/types.hpp"

namespace locov {

/// Eigenvalues (variances sigma_k^2) of the true covariance.
struct EigenSpec {
  enum class Kind { identity, linspace, list };
  Kind kind = Kind::identity;
  double lo = 1.0;
  double hi = 1.0;
  std::vector<double> values;

  static EigenSpec identity() { return {}; }
  static EigenSpec linspace(double lo, double hi) { return {Kind::linspace, lo, hi, {}}; }
  static EigenSpec list(std::vector<double> v) { return {Kind::list, 1.0, 1.0, std::move(v)}; }

  /// Parses "identity", "linspace:lo:hi" or "list:v1,v2,...".
  static EigenSpec parse(const std::string& text);
  std::string to_string() const;

  /// The p variances; throws InputError on a size mismatch or non-positive value.
  Vector<double> variances(Index p) const;
};

enum class BasisKind { identity, haar };

struct EstimatorSpec {
  enum class Kind { sample, locov2, locovk, locovk_running_mean };
  Kind kind = Kind::sample;
  Index k = 0;

  /// Parses "sample", "locov2", "locovk:<k>" or "locovk-rm:<k>".
  static EstimatorSpec parse(const std::string& text);
  std::string tag() const;

  friend bool operator==(const EstimatorSpec&, const EstimatorSpec&) = default;
};

std::vector<EstimatorSpec> parse_estimator_list(const std::string& comma_separated);
NoiseDistribution parse_noise(const std::string& text);
std::string to_string(NoiseDistribution noise);
BasisKind parse_basis(const std::string& text);
std::string to_string(BasisKind basis);

struct TrialConfig {
  Index p = 30;
  Index n = 30;
  EigenSpec eigen = EigenSpec::identity();
  BasisKind basis = BasisKind::identity;
  NoiseDistribution noise = NoiseDistribution::gaussian;
  Index trials = 300;
  std::uint64_t seed = 1;
  std::vector<EstimatorSpec> estimators{EstimatorSpec{}};
  unsigned threads = 1;  // 0 = hardware concurrency; results do not depend on it

  /// Throws InputError on invalid settings.
  void validate() const;
};

/// Exact quantities of the configuration's true covariance.
struct GroundTruth {
  Vector<double> variances;
  Matrix<double> basis;
  Matrix<double> covariance;
  Vector<double> free_weight;  // S_Sigma
  PortfolioWeight<double> weights;
  double risk = 0.0;
};

/// The Haar basis is drawn once per (seed) so every trial shares the same truth.
GroundTruth make_ground_truth(const TrialConfig& config);

struct TrialRecord {
  Index trial_id = 0;
  std::string estimator;
  bool ok = false;
  std::string failure;  // empty when ok
  PortfolioWeight<double> weights;
  double sample_risk = 0.0;  // w^T Sigma_hat w
  double oracle_risk = 0.0;  // w^T Sigma w
  Vector<double> weight_error;  // w - w*
  double mean_abs_error = 0.0;
  std::optional<double> free_weight_error;  // ||S_hat - S_Sigma||_2, sample estimator only
  std::optional<double> free_weight_sum;    // sum of S_hat, sample estimator only
  std::size_t skipped_blocks = 0;
};

struct ErrorSummary {
  std::string estimator;
  Index trials_ok = 0;
  Index failures = 0;
  Vector<double> per_asset_mean_weight;
  Vector<double> per_asset_mean_error;
  Vector<double> per_asset_std_error;
  double mse = 0.0;             // mean over trials and assets of (w_k - w*_k)^2
  double mean_abs_error = 0.0;  // mean over trials of mean_k |w_k - w*_k|
  double median_abs_error = 0.0;
  double risk_underestimate_freq = 0.0;  // share of trials with sample_risk < true_risk
  PortfolioWeight<double> true_weights;
  double true_risk = 0.0;
};

struct ExperimentResult {
  GroundTruth truth;
  std::vector<TrialRecord> records;  // trial-major, estimator order within a trial
  std::vector<ErrorSummary> summaries;  // one per configured estimator
};

ExperimentResult run_experiment(const TrialConfig& config);

/// Aggregates the records of one estimator. Failed trials are counted but excluded.
ErrorSummary summarize(const std::vector<TrialRecord>& records, const std::string& estimator,
                       const GroundTruth& truth);

struct ScalingPoint {
  Index n = 0;
  double median_error = 0.0;
  double failure_rate = 0.0;
  std::optional<double> theorem_band_fraction;
};

struct ScalingFit {
  std::string estimator;
  std::vector<Index> n_grid;
  std::vector<double> median_errors;
  double loglog_slope = 0.0;
  double slope_stderr = 0.0;
  double theorem_constant = 10.0;
  std::vector<ScalingPoint> points;
};

inline constexpr double kSweepFailureLimit = 0.10;

/// Runs config at every n of n_grid (config.n is ignored) and fits
/// log(median error) against log(n) for the first configured estimator.
/// Throws InputError on a bad grid and SweepError when a point has more than
/// 10% failed trials.
ScalingFit scaling_sweep(const TrialConfig& config, const std::vector<Index>& n_grid,
                         double theorem_constant = 10.0);

class SweepError : public Error {
 public:
  SweepError(const std::string& what, Index n) : Error(what), n_(n) {}
  Index n() const noexcept { return n_; }

 private:
  Index n_;
};

struct ComparisonReport {
  ExperimentResult experiment;
  /// win_rate[a][b]: share of trials with both ok where a's mean |error| < b's.
  std::vector<std::vector<double>> win_rate;
};

ComparisonReport compare_estimators(const TrialConfig& config);

/// Least-squares slope and its standard error.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace locov
