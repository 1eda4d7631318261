// locov: minimum-variance portfolio simulations, scaling sweeps and
// estimation from CSV return data.
//
// Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numerical failure.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "locov/experiment.hpp"
#include "locov/io.hpp"
#include "locov/locov.hpp"
#include "locov/minvar.hpp"
#include "locov/random.hpp"

#ifndef LOCOV_VERSION
#define LOCOV_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags shared by simulate and sweep.
struct ModelFlags {
  std::optional<long long> p;
  std::optional<long long> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> sigma;
  std::optional<std::string> basis;
  std::optional<std::string> noise;
  std::optional<std::string> estimators;
  unsigned threads = 1;
  std::string out = ".";
  bool timestamp = false;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--p", f.p, "Number of assets")->check(CLI::Range(2LL, 100000LL));
  cmd->add_option("--trials", f.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Base seed (falls back to $LOCOV_SEED)");
  cmd->add_option("--sigma", f.sigma, "Eigenvalues of Sigma: identity | linspace:lo:hi | list:v1,v2,...");
  cmd->add_option("--basis", f.basis, "identity | haar");
  cmd->add_option("--noise", f.noise, "gaussian | rademacher | uniform");
  cmd->add_option("--estimators", f.estimators, "Comma list of sample, locov2, locovk:<k>, locovk-rm:<k>");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores); output does not depend on it");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_flag("--timestamp", f.timestamp, "Record wall-clock time in the manifest");
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("LOCOV_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("LOCOV_SEED is not an unsigned integer: '") + env + "'");
  }
  return 1;
}

std::vector<locov::Index> parse_index_list(const std::string& text, const char* flag) {
  std::vector<locov::Index> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      out.push_back(static_cast<locov::Index>(v));
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": invalid entry '" + part + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + " is empty");
  return out;
}

void apply_model_flags(const ModelFlags& f, locov::TrialConfig& cfg) {
  if (f.p) cfg.p = static_cast<locov::Index>(*f.p);
  if (f.trials) cfg.trials = static_cast<locov::Index>(*f.trials);
  if (f.sigma) cfg.eigen = locov::EigenSpec::parse(*f.sigma);
  if (f.basis) cfg.basis = locov::parse_basis(*f.basis);
  if (f.noise) cfg.noise = locov::parse_noise(*f.noise);
  if (f.estimators) cfg.estimators = locov::parse_estimator_list(*f.estimators);
  cfg.seed = resolve_seed(f.seed);
  cfg.threads = f.threads;
}

std::string iso8601_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

json manifest(const std::string& command, std::uint64_t seed, json config, bool timestamp) {
  json m = {{"tool", "locov"}, {"version", LOCOV_VERSION}, {"command", command}, {"seed", seed},
            {"config", std::move(config)}};
  if (timestamp) m["timestamp"] = iso8601_now();
  return m;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw locov::Error("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw locov::Error("cannot write '" + path.string() + "'");
  out << text;
}

// ---------------------------------------------------------------- simulate

struct Preset {
  locov::TrialConfig config;
  std::vector<locov::Index> n_values;
};

Preset make_preset(const std::string& name) {
  using locov::EstimatorSpec;
  Preset preset;
  locov::TrialConfig& c = preset.config;
  c.p = 30;
  c.trials = 300;
  c.eigen = locov::EigenSpec::linspace(1.0, 30.0);
  c.basis = locov::BasisKind::identity;
  const std::vector<EstimatorSpec> compare{EstimatorSpec::parse("sample"), EstimatorSpec::parse("locov2")};
  if (name == "fig1") {
    preset.n_values = {30, 3000};
  } else if (name == "fig2") {
    c.basis = locov::BasisKind::haar;
    preset.n_values = {30, 3000};
  } else if (name == "fig3") {
    c.eigen = locov::EigenSpec::identity();
    c.estimators = compare;
    preset.n_values = {30};
  } else if (name == "fig4") {
    c.estimators = compare;
    preset.n_values = {30};
  } else if (name == "fig5") {
    c.basis = locov::BasisKind::haar;
    c.estimators = compare;
    preset.n_values = {30};
  } else {
    throw UsageError("unknown preset '" + name + "' (expected fig1..fig5)");
  }
  return preset;
}

struct SimulateArgs {
  ModelFlags model;
  std::optional<std::string> preset;
  std::optional<std::string> n;
  double fail_threshold = 0.1;
};

int cmd_simulate(const SimulateArgs& args) {
  Preset preset;
  if (args.preset) {
    preset = make_preset(*args.preset);
  } else {
    preset.n_values = {30};
  }
  if (args.n) preset.n_values = parse_index_list(*args.n, "--n");
  locov::TrialConfig base = preset.config;
  apply_model_flags(args.model, base);
  if (args.fail_threshold < 0.0 || args.fail_threshold > 1.0)
    throw UsageError("--fail-threshold must lie in [0, 1]");

  std::vector<locov::ExperimentResult> results;
  std::vector<locov::ComparisonReport> comparisons;
  for (locov::Index n : preset.n_values) {
    locov::TrialConfig cfg = base;
    cfg.n = n;
    if (cfg.estimators.size() >= 2) {
      comparisons.push_back(locov::compare_estimators(cfg));
      results.push_back(comparisons.back().experiment);
    } else {
      results.push_back(locov::run_experiment(cfg));
      comparisons.emplace_back();
    }
  }

  ensure_dir(args.model.out);
  const fs::path out(args.model.out);
  std::vector<locov::io::LabeledRun> labeled;
  for (std::size_t i = 0; i < results.size(); ++i) labeled.push_back({preset.n_values[i], &results[i]});

  std::ostringstream trials, spread;
  locov::io::write_trials_csv(trials, labeled);
  locov::io::write_spread_csv(spread, labeled);
  write_text(out / "trials.csv", trials.str());
  write_text(out / "spread.csv", spread.str());

  json config = locov::io::to_json(base);
  config.erase("n");
  config["n"] = preset.n_values;
  if (args.preset) config["preset"] = *args.preset;
  config["fail_threshold"] = args.fail_threshold;

  double worst_failure = 0.0;
  json runs = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    json run = {{"n", preset.n_values[i]},
                {"true_weights", locov::io::to_json(results[i].truth.weights)},
                {"true_risk", results[i].truth.risk}};
    json summaries = json::object();
    for (const auto& s : results[i].summaries) {
      summaries[s.estimator] = locov::io::to_json(s);
      worst_failure = std::max(worst_failure, static_cast<double>(s.failures) / static_cast<double>(base.trials));
    }
    run["summaries"] = summaries;
    if (!comparisons[i].win_rate.empty()) {
      json wins = json::object();
      const auto& est = base.estimators;
      for (std::size_t a = 0; a < est.size(); ++a)
        for (std::size_t b = 0; b < est.size(); ++b)
          if (a != b) wins[est[a].tag() + " vs " + est[b].tag()] = comparisons[i].win_rate[a][b];
      run["win_rate"] = wins;
    }
    runs.push_back(run);
  }
  json doc = {{"manifest", manifest("simulate", base.seed, config, args.model.timestamp)}, {"runs", runs}};
  locov::io::write_json_file((out / "summary.json").string(), doc);

  for (std::size_t i = 0; i < results.size(); ++i)
    for (const auto& s : results[i].summaries)
      std::cout << "n=" << preset.n_values[i] << " " << s.estimator << ": mse=" << locov::io::format_double(s.mse)
                << " mean_abs_error=" << locov::io::format_double(s.mean_abs_error)
                << " risk_underestimate_freq=" << locov::io::format_double(s.risk_underestimate_freq)
                << " failures=" << s.failures << "\n";

  if (worst_failure > 0.0 && worst_failure >= args.fail_threshold) {
    std::cerr << "error: solver failure rate " << worst_failure << " reached --fail-threshold "
              << args.fail_threshold << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string csv;
  std::string estimator = "sample";
  std::optional<long long> k;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool timestamp = false;
};

int cmd_estimate(const EstimateArgs& args) {
  std::string est_text = args.estimator;
  if (args.k) {
    if (est_text == "locovk" || est_text == "locovk-rm")
      est_text += ":" + std::to_string(*args.k);
    else
      throw UsageError("--k only applies to --estimator locovk or locovk-rm");
  }
  if (est_text == "locovk" || est_text == "locovk-rm") throw UsageError(est_text + " needs --k");
  const locov::EstimatorSpec spec = locov::EstimatorSpec::parse(est_text);
  const std::uint64_t seed = resolve_seed(args.seed);

  const locov::io::ReturnTable table = locov::io::read_returns_csv_file(args.csv);
  const auto centered = locov::center_returns(table.returns);
  const locov::Matrix<double> cov = locov::sample_covariance(centered);
  const locov::Index p = cov.rows();
  if (spec.kind != locov::EstimatorSpec::Kind::sample && spec.kind != locov::EstimatorSpec::Kind::locov2 &&
      spec.k > p)
    throw UsageError("--k " + std::to_string(spec.k) + " exceeds the number of assets " + std::to_string(p));

  locov::PortfolioWeight<double> weights;
  json details = json::object();
  switch (spec.kind) {
    case locov::EstimatorSpec::Kind::sample: {
      try {
        weights = locov::min_variance_weights(cov);
      } catch (const locov::NonInvertibleError& e) {
        throw locov::NonInvertibleError(std::string(e.what()) + "; try --estimator locov2",
                                        e.relative_min_eigenvalue());
      }
      break;
    }
    case locov::EstimatorSpec::Kind::locov2: {
      const auto res = locov::locov2(cov);
      weights = res.weights;
      details["skipped_blocks"] = res.diagnostics.skipped_blocks;
      details["solved_blocks"] = res.diagnostics.solved_blocks;
      break;
    }
    default: {
      locov::RandomStream rng = locov::make_stream(seed, {0});
      locov::LocovkOptions opts;
      opts.update = spec.kind == locov::EstimatorSpec::Kind::locovk ? locov::VoteUpdate::halving
                                                                    : locov::VoteUpdate::running_mean;
      const auto res = locov::locovk(cov, spec.k, rng, opts);
      weights = res.weights;
      details["skipped_blocks"] = res.diagnostics.skipped_blocks;
      details["solved_blocks"] = res.diagnostics.solved_blocks;
      details["resamples"] = res.diagnostics.resamples;
      break;
    }
  }

  ensure_dir(args.out);
  const fs::path out(args.out);
  std::ostringstream w;
  locov::io::write_weights_csv(w, table.asset_names, weights);
  write_text(out / "weights.csv", w.str());

  const json config = {{"csv", args.csv}, {"estimator", spec.tag()}};
  json doc = {{"manifest", manifest("estimate", seed, config, args.timestamp)},
              {"estimator", spec.tag()},
              {"n", centered.n_samples()},
              {"p", p},
              {"in_sample_risk", locov::portfolio_risk(weights, cov)},
              {"weight_sum", weights.sum()},
              {"diagnostics", details}};
  locov::io::write_json_file((out / "risk.json").string(), doc);

  std::cout << "estimator " << spec.tag() << ": in-sample risk "
            << locov::io::format_double(locov::portfolio_risk(weights, cov));
  if (details.contains("skipped_blocks")) std::cout << ", skipped blocks " << details["skipped_blocks"];
  std::cout << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  ModelFlags model;
  std::string n_grid;
  double theorem_constant = 10.0;
};

int cmd_sweep(const SweepArgs& args) {
  locov::TrialConfig cfg;
  cfg.trials = 200;
  apply_model_flags(args.model, cfg);
  const auto grid = parse_index_list(args.n_grid, "--n-grid");
  if (grid.size() < 3) throw UsageError("--n-grid needs at least 3 points");

  const locov::ScalingFit fit = locov::scaling_sweep(cfg, grid, args.theorem_constant);

  ensure_dir(args.model.out);
  const fs::path out(args.model.out);
  json config = locov::io::to_json(cfg);
  config.erase("n");
  config["n_grid"] = grid;
  config["theorem_constant"] = args.theorem_constant;
  json doc = locov::io::to_json(fit);
  doc["manifest"] = manifest("sweep", cfg.seed, config, args.model.timestamp);
  locov::io::write_json_file((out / "scaling.json").string(), doc);
  std::ostringstream table;
  locov::io::write_scaling_csv(table, fit);
  write_text(out / "scaling.csv", table.str());

  std::cout << "loglog_slope " << locov::io::format_double(fit.loglog_slope) << " +/- "
            << locov::io::format_double(fit.slope_stderr) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-variance portfolios and low-dimension covariance voting"};
  app.set_version_flag("--version", LOCOV_VERSION);
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo comparison of estimators");
  add_model_flags(simulate, sim.model);
  simulate->add_option("--preset", sim.preset, "fig1 | fig2 | fig3 | fig4 | fig5");
  simulate->add_option("--n", sim.n, "Sample size, or a comma list of sizes");
  simulate->add_option("--fail-threshold", sim.fail_threshold,
                       "Exit 3 when an estimator's failure share reaches this fraction");

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate a portfolio from a CSV of returns");
  estimate->add_option("--csv", est.csv, "Returns CSV (rows = samples, columns = assets)")->required();
  estimate->add_option("--estimator", est.estimator, "sample | locov2 | locovk | locovk-rm (or locovk:<k>)");
  estimate->add_option("--k", est.k, "Block size for locovk");
  estimate->add_option("--seed", est.seed, "Seed for locovk (falls back to $LOCOV_SEED)");
  estimate->add_option("--out", est.out, "Output directory");
  estimate->add_flag("--timestamp", est.timestamp, "Record wall-clock time in the manifest");

  SweepArgs sw;
  CLI::App* sweep = app.add_subcommand("sweep", "Fit the log-log error scaling over a grid of n");
  add_model_flags(sweep, sw.model);
  sweep->add_option("--n-grid", sw.n_grid, "Comma list of sample sizes (>= 3, spanning a decade)")->required();
  sweep->add_option("--theorem-constant", sw.theorem_constant, "Constant C of the free-weight error band");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (estimate->parsed()) return cmd_estimate(est);
    if (sweep->parsed()) return cmd_sweep(sw);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const locov::io::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const locov::DegenerateInputError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const locov::InputError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const locov::NonInvertibleError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const locov::AmbiguousPortfolioError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const locov::DegenerateAssetError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const locov::SweepError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const locov::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
