#include "locov/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <sstream>
#include <thread>

#include "locov/locov.hpp"
#include "locov/minvar.hpp"
#include "locov/random.hpp"

namespace locov {

namespace {

// Stream keys; every trial and estimator gets its own substream.
constexpr std::uint64_t kBasisStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kEstimatorStream = 2;

double parse_double(const std::string& text, const std::string& context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw InputError("invalid number '" + text + "' in " + context);
  return v;
}

Index parse_index(const std::string& text, const std::string& context) {
  long long v = 0;
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw InputError("invalid integer '" + text + "' in " + context);
  return static_cast<Index>(v);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

TrialRecord run_estimator(const EstimatorSpec& spec, const Matrix<double>& sample_cov,
                          const GroundTruth& truth, RandomStream& rng) {
  TrialRecord rec;
  rec.estimator = spec.tag();
  try {
    switch (spec.kind) {
      case EstimatorSpec::Kind::sample: {
        const FreeWeight<double> s = free_optimal_weight(sample_cov);
        rec.weights = normalize(s);
        rec.free_weight_error = (s.values - truth.free_weight).norm();
        rec.free_weight_sum = s.signed_sum;
        break;
      }
      case EstimatorSpec::Kind::locov2: {
        auto res = locov2(sample_cov);
        rec.weights = std::move(res.weights);
        rec.skipped_blocks = res.diagnostics.skipped_blocks;
        break;
      }
      case EstimatorSpec::Kind::locovk:
      case EstimatorSpec::Kind::locovk_running_mean: {
        LocovkOptions opts;
        opts.update = spec.kind == EstimatorSpec::Kind::locovk ? VoteUpdate::halving
                                                               : VoteUpdate::running_mean;
        auto res = locovk(sample_cov, spec.k, rng, opts);
        rec.weights = std::move(res.weights);
        rec.skipped_blocks = res.diagnostics.skipped_blocks;
        break;
      }
    }
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    rec.ok = false;
    rec.failure = e.what();
    return rec;
  }
  rec.ok = true;
  rec.sample_risk = portfolio_risk(rec.weights, sample_cov);
  rec.oracle_risk = portfolio_risk(rec.weights, truth.covariance);
  rec.weight_error = rec.weights - truth.weights;
  rec.mean_abs_error = rec.weight_error.cwiseAbs().mean();
  return rec;
}

}  // namespace

EigenSpec EigenSpec::parse(const std::string& text) {
  if (text == "identity") return identity();
  if (text.rfind("linspace:", 0) == 0) {
    const auto parts = split(text.substr(9), ':');
    if (parts.size() != 2) throw InputError("expected linspace:lo:hi, got '" + text + "'");
    return linspace(parse_double(parts[0], "--sigma"), parse_double(parts[1], "--sigma"));
  }
  if (text.rfind("list:", 0) == 0) {
    std::vector<double> values;
    for (const auto& part : split(text.substr(5), ',')) values.push_back(parse_double(part, "--sigma"));
    return list(std::move(values));
  }
  throw InputError("unknown eigenvalue spec '" + text + "'");
}

std::string EigenSpec::to_string() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind) {
    case Kind::identity:
      return "identity";
    case Kind::linspace:
      out << "linspace:" << lo << ':' << hi;
      return out.str();
    case Kind::list:
      out << "list:";
      for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
      return out.str();
  }
  return "identity";
}

Vector<double> EigenSpec::variances(Index p) const {
  Vector<double> v(p);
  switch (kind) {
    case Kind::identity:
      v.setOnes();
      break;
    case Kind::linspace:
      if (p == 1) {
        v(0) = lo;
      } else {
        for (Index k = 0; k < p; ++k)
          v(k) = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(p - 1);
      }
      break;
    case Kind::list:
      if (static_cast<Index>(values.size()) != p)
        throw InputError("eigenvalue list has " + std::to_string(values.size()) +
                         " entries, expected " + std::to_string(p));
      for (Index k = 0; k < p; ++k) v(k) = values[static_cast<std::size_t>(k)];
      break;
  }
  for (Index k = 0; k < p; ++k)
    if (!(v(k) > 0.0) || !std::isfinite(v(k))) throw InputError("eigenvalues must be positive");
  return v;
}

EstimatorSpec EstimatorSpec::parse(const std::string& text) {
  if (text == "sample") return {Kind::sample, 0};
  if (text == "locov2") return {Kind::locov2, 0};
  auto with_k = [&](const std::string& prefix, Kind kind) -> std::optional<EstimatorSpec> {
    if (text.rfind(prefix, 0) != 0) return std::nullopt;
    const Index k = parse_index(text.substr(prefix.size()), "--estimators");
    if (k < 3) throw InputError("locovk needs k >= 3, got '" + text + "'");
    return EstimatorSpec{kind, k};
  };
  if (auto s = with_k("locovk:", Kind::locovk)) return *s;
  if (auto s = with_k("locovk-rm:", Kind::locovk_running_mean)) return *s;
  throw InputError("unknown estimator '" + text + "'");
}

std::string EstimatorSpec::tag() const {
  switch (kind) {
    case Kind::sample:
      return "sample";
    case Kind::locov2:
      return "locov2";
    case Kind::locovk:
      return "locovk:" + std::to_string(k);
    case Kind::locovk_running_mean:
      return "locovk-rm:" + std::to_string(k);
  }
  return "sample";
}

std::vector<EstimatorSpec> parse_estimator_list(const std::string& comma_separated) {
  std::vector<EstimatorSpec> out;
  for (const auto& part : split(comma_separated, ',')) {
    auto spec = EstimatorSpec::parse(part);
    if (std::find(out.begin(), out.end(), spec) != out.end())
      throw InputError("estimator '" + part + "' listed twice");
    out.push_back(spec);
  }
  if (out.empty()) throw InputError("no estimators given");
  return out;
}

NoiseDistribution parse_noise(const std::string& text) {
  if (text == "gaussian") return NoiseDistribution::gaussian;
  if (text == "rademacher") return NoiseDistribution::rademacher;
  if (text == "uniform") return NoiseDistribution::uniform;
  throw InputError("unknown noise distribution '" + text + "'");
}

std::string to_string(NoiseDistribution noise) {
  switch (noise) {
    case NoiseDistribution::gaussian:
      return "gaussian";
    case NoiseDistribution::rademacher:
      return "rademacher";
    case NoiseDistribution::uniform:
      return "uniform";
  }
  return "gaussian";
}

BasisKind parse_basis(const std::string& text) {
  if (text == "identity") return BasisKind::identity;
  if (text == "haar") return BasisKind::haar;
  throw InputError("unknown basis '" + text + "'");
}

std::string to_string(BasisKind basis) { return basis == BasisKind::haar ? "haar" : "identity"; }

void TrialConfig::validate() const {
  if (p < 2) throw InputError("p must be >= 2");
  if (n < 1) throw InputError("n must be >= 1");
  if (trials < 1) throw InputError("trials must be >= 1");
  if (estimators.empty()) throw InputError("at least one estimator is required");
  for (const auto& e : estimators)
    if ((e.kind == EstimatorSpec::Kind::locovk || e.kind == EstimatorSpec::Kind::locovk_running_mean) &&
        (e.k < 3 || e.k > p))
      throw InputError("estimator " + e.tag() + " needs 3 <= k <= p");
  (void)eigen.variances(p);
}

GroundTruth make_ground_truth(const TrialConfig& config) {
  GroundTruth truth;
  truth.variances = config.eigen.variances(config.p);
  if (config.basis == BasisKind::haar) {
    RandomStream rng = make_stream(config.seed, {kBasisStream});
    truth.basis = sample_haar_orthogonal<double>(config.p, rng);
  } else {
    truth.basis = Matrix<double>::Identity(config.p, config.p);
  }
  const SpectralModel<double> model(truth.variances.cwiseSqrt(), truth.basis);
  truth.covariance = build_covariance(model);
  const FreeWeight<double> s = free_optimal_weight(truth.covariance);
  truth.free_weight = s.values;
  truth.weights = normalize(s);
  truth.risk = optimal_risk(s);
  return truth;
}

ErrorSummary summarize(const std::vector<TrialRecord>& records, const std::string& estimator,
                       const GroundTruth& truth) {
  const Index p = truth.weights.size();
  ErrorSummary out;
  out.estimator = estimator;
  out.true_weights = truth.weights;
  out.true_risk = truth.risk;

  Vector<double> sum = Vector<double>::Zero(p);
  Vector<double> sum_sq = Vector<double>::Zero(p);
  double sq_total = 0.0;
  double abs_total = 0.0;
  Index under = 0;
  std::vector<double> abs_errors;
  for (const auto& rec : records) {
    if (rec.estimator != estimator) continue;
    if (!rec.ok) {
      ++out.failures;
      continue;
    }
    ++out.trials_ok;
    sum += rec.weight_error;
    sq_total += rec.weight_error.squaredNorm();
    abs_total += rec.mean_abs_error;
    abs_errors.push_back(rec.mean_abs_error);
    if (rec.sample_risk < truth.risk) ++under;
  }
  if (out.trials_ok == 0) {
    out.per_asset_mean_error = Vector<double>::Constant(p, std::nan(""));
    out.per_asset_std_error = out.per_asset_mean_error;
    out.per_asset_mean_weight = out.per_asset_mean_error;
    out.mse = out.mean_abs_error = out.median_abs_error = out.risk_underestimate_freq = std::nan("");
    return out;
  }
  const double m = static_cast<double>(out.trials_ok);
  out.per_asset_mean_error = sum / m;
  for (const auto& rec : records) {
    if (rec.estimator != estimator || !rec.ok) continue;
    sum_sq += (rec.weight_error - out.per_asset_mean_error).array().square().matrix();
  }
  out.per_asset_std_error =
      out.trials_ok > 1 ? Vector<double>((sum_sq / (m - 1.0)).cwiseSqrt()) : Vector<double>::Zero(p);
  out.per_asset_mean_weight = truth.weights + out.per_asset_mean_error;
  out.mse = sq_total / (m * static_cast<double>(p));
  out.mean_abs_error = abs_total / m;
  out.median_abs_error = median(std::move(abs_errors));
  out.risk_underestimate_freq = static_cast<double>(under) / m;
  return out;
}

ExperimentResult run_experiment(const TrialConfig& config) {
  config.validate();
  ExperimentResult result;
  result.truth = make_ground_truth(config);
  const SpectralModel<double> model(result.truth.variances.cwiseSqrt(), result.truth.basis);

  const std::size_t n_est = config.estimators.size();
  const auto n_trials = static_cast<std::size_t>(config.trials);
  result.records.resize(n_trials * n_est);

  auto run_trial = [&](std::size_t t) {
    RandomStream noise_rng = make_stream(config.seed, {kNoiseStream, t});
    const auto x = sample_returns(model, config.n, config.noise, noise_rng);
    const Matrix<double> cov = sample_covariance(x);
    for (std::size_t e = 0; e < n_est; ++e) {
      RandomStream est_rng = make_stream(config.seed, {kEstimatorStream, t, e});
      TrialRecord rec = run_estimator(config.estimators[e], cov, result.truth, est_rng);
      rec.trial_id = static_cast<Index>(t);
      result.records[t * n_est + e] = std::move(rec);
    }
  };

  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_trials));
  if (threads <= 1) {
    for (std::size_t t = 0; t < n_trials; ++t) run_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t; (t = next.fetch_add(1)) < n_trials && !failed.load();) {
          try {
            run_trial(t);
          } catch (...) {
            if (!failed.exchange(true)) first_error = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (const auto& spec : config.estimators)
    result.summaries.push_back(summarize(result.records, spec.tag(), result.truth));
  return result;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("line fit needs >= 2 paired points");
  const double m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("line fit needs distinct x values");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - (fit.intercept + fit.slope * x[i]);
      ssr += r * r;
    }
    fit.slope_stderr = std::sqrt(ssr / (m - 2.0) / sxx);
  }
  return fit;
}

ScalingFit scaling_sweep(const TrialConfig& config, const std::vector<Index>& n_grid,
                         double theorem_constant) {
  if (n_grid.size() < 3) throw InputError("scaling sweep needs at least 3 grid points");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw InputError("n grid must be strictly increasing");
  if (n_grid.front() < 1 || static_cast<double>(n_grid.back()) < 10.0 * static_cast<double>(n_grid.front()))
    throw InputError("n grid must span at least one decade");
  for (Index n : n_grid)
    if (n < 2 * config.p)
      throw InputError("n grid point " + std::to_string(n) + " is below 2p = " + std::to_string(2 * config.p));

  ScalingFit fit;
  fit.estimator = config.estimators.at(0).tag();
  fit.theorem_constant = theorem_constant;
  std::vector<double> log_n, log_err;

  for (Index n : n_grid) {
    TrialConfig cfg = config;
    cfg.n = n;
    const ExperimentResult res = run_experiment(cfg);
    const ErrorSummary& summary = res.summaries.front();

    ScalingPoint point;
    point.n = n;
    point.failure_rate = static_cast<double>(summary.failures) / static_cast<double>(cfg.trials);
    if (point.failure_rate > kSweepFailureLimit)
      throw SweepError("grid point n = " + std::to_string(n) + " failed in " +
                           std::to_string(summary.failures) + " of " + std::to_string(cfg.trials) +
                           " trials",
                       n);
    point.median_error = summary.median_abs_error;

    const double sd_ratio = std::sqrt(res.truth.variances.maxCoeff() / res.truth.variances.minCoeff());
    const double bound = theorem_constant * res.truth.free_weight.norm() * sd_ratio *
                         std::sqrt(static_cast<double>(cfg.p) / static_cast<double>(n));
    Index inside = 0, counted = 0;
    for (const auto& rec : res.records) {
      if (!rec.ok || !rec.free_weight_error) continue;
      ++counted;
      if (*rec.free_weight_error <= bound) ++inside;
    }
    if (counted > 0) point.theorem_band_fraction = static_cast<double>(inside) / static_cast<double>(counted);

    fit.n_grid.push_back(n);
    fit.median_errors.push_back(point.median_error);
    log_n.push_back(std::log(static_cast<double>(n)));
    log_err.push_back(std::log(point.median_error));
    fit.points.push_back(point);
  }

  const LineFit line = fit_line(log_n, log_err);
  fit.loglog_slope = line.slope;
  fit.slope_stderr = line.slope_stderr;
  return fit;
}

ComparisonReport compare_estimators(const TrialConfig& config) {
  if (config.estimators.size() < 2) throw InputError("comparison needs at least two estimators");
  ComparisonReport report;
  report.experiment = run_experiment(config);
  const std::size_t m = config.estimators.size();
  report.win_rate.assign(m, std::vector<double>(m, 0.0));
  const auto& recs = report.experiment.records;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      Index wins = 0, both = 0;
      for (std::size_t t = 0; t < static_cast<std::size_t>(config.trials); ++t) {
        const auto& ra = recs[t * m + a];
        const auto& rb = recs[t * m + b];
        if (!ra.ok || !rb.ok) continue;
        ++both;
        if (ra.mean_abs_error < rb.mean_abs_error) ++wins;
      }
      report.win_rate[a][b] = both ? static_cast<double>(wins) / static_cast<double>(both) : std::nan("");
    }
  }
  return report;
}

}  // namespace locov
