#pragma once

// Flat-file surfaces: return-matrix CSV ingestion and the CSV/JSON tables
// written by the command-line tool.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "locov/covmodel.hpp"
#include "locov/errors.hpp"
#include "locov/experiment.hpp"

namespace locov::io {

/// CSV problem at a 1-based (row, column); column 0 means the whole row.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : InputError(what), row_(row), column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

struct ReturnTable {
  std::vector<std::string> asset_names;  // header cells, or 1-based indices without a header
  bool had_header = false;
  ReturnMatrix<double> returns;  // uncentered
};

/// Comma-separated; rows are samples, columns assets. A first row with any
/// non-numeric cell is a header. Requires >= 2 data rows and >= 2 columns.
ReturnTable read_returns_csv(std::istream& in);
ReturnTable read_returns_csv_file(const std::string& path);

/// %.17g, lossless for doubles.
std::string format_double(double v);

void write_weights_csv(std::ostream& out, const std::vector<std::string>& names,
                       const Vector<double>& weights);
std::vector<std::pair<std::string, double>> read_weights_csv(std::istream& in);

/// One experiment per sample size n, in the order given.
struct LabeledRun {
  Index n = 0;
  const ExperimentResult* result = nullptr;
};

/// n, trial_id, estimator, status, sample_risk, oracle_risk, mean_abs_error,
/// skipped_blocks, free_weight_error, w_1..w_p.
void write_trials_csv(std::ostream& out, const std::vector<LabeledRun>& runs);

/// n, estimator, asset_index, true_weight, mean_est_weight, std_est_weight.
void write_spread_csv(std::ostream& out, const std::vector<LabeledRun>& runs);

/// n, median_error, failure_rate, theorem_band_fraction.
void write_scaling_csv(std::ostream& out, const ScalingFit& fit);

nlohmann::json to_json(const TrialConfig& config);
nlohmann::json to_json(const ErrorSummary& summary);
nlohmann::json to_json(const ScalingFit& fit);
nlohmann::json to_json(const Vector<double>& v);

/// Serialized with two-space indent and a trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& doc);
std::string read_text_file(const std::string& path);

}  // namespace locov::io
