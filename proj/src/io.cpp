#include "locov/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace locov::io {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool parse_number(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

ReturnTable read_returns_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  ReturnTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content = true;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;

    auto cells = split_row(line);
    if (first_content) {
      first_content = false;
      width = cells.size();
      bool numeric = true;
      double tmp = 0.0;
      for (const auto& c : cells) numeric = numeric && parse_number(c, tmp);
      if (!numeric) {
        table.had_header = true;
        table.asset_names = cells;
        continue;
      }
    }
    if (cells.size() != width)
      throw ParseError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                           " cells, expected " + std::to_string(width),
                       line_no, 0);
    std::vector<double> values(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (!parse_number(cells[c], values[c]))
        throw ParseError("non-numeric cell '" + cells[c] + "' at row " + std::to_string(line_no) +
                             ", column " + std::to_string(c + 1),
                         line_no, c + 1);
    }
    rows.push_back(std::move(values));
  }

  if (width < 2) throw ParseError("return data needs at least 2 asset columns", line_no, 0);
  if (rows.size() < 2) throw ParseError("return data needs at least 2 sample rows", line_no, 0);

  if (!table.had_header)
    for (std::size_t c = 0; c < width; ++c) table.asset_names.push_back(std::to_string(c + 1));

  Matrix<double> x(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) x(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  table.returns.entries = std::move(x);
  table.returns.centered = false;
  return table;
}

ReturnTable read_returns_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0, 0);
  return read_returns_csv(in);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_weights_csv(std::ostream& out, const std::vector<std::string>& names,
                       const Vector<double>& weights) {
  if (static_cast<Index>(names.size()) != weights.size())
    throw InputError("asset names and weights differ in length");
  out << "asset,weight\n";
  for (Index i = 0; i < weights.size(); ++i)
    out << names[static_cast<std::size_t>(i)] << ',' << format_double(weights(i)) << '\n';
}

std::vector<std::pair<std::string, double>> read_weights_csv(std::istream& in) {
  std::vector<std::pair<std::string, double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 || trim(line).empty()) continue;
    const auto cells = split_row(line);
    double w = 0.0;
    if (cells.size() != 2) throw ParseError("weights row needs 2 cells", line_no, 0);
    if (!parse_number(cells[1], w)) throw ParseError("non-numeric weight", line_no, 2);
    out.emplace_back(cells[0], w);
  }
  return out;
}

void write_trials_csv(std::ostream& out, const std::vector<LabeledRun>& runs) {
  Index p = 0;
  for (const auto& r : runs) p = std::max(p, r.result->truth.weights.size());
  out << "n,trial_id,estimator,status,sample_risk,oracle_risk,mean_abs_error,skipped_blocks,"
         "free_weight_error";
  for (Index k = 0; k < p; ++k) out << ",w_" << (k + 1);
  out << '\n';
  for (const auto& run : runs) {
    for (const auto& rec : run.result->records) {
      out << run.n << ',' << rec.trial_id << ',' << rec.estimator << ',' << (rec.ok ? "ok" : "failed");
      if (rec.ok) {
        out << ',' << format_double(rec.sample_risk) << ',' << format_double(rec.oracle_risk) << ','
            << format_double(rec.mean_abs_error);
      } else {
        out << ",,,";
      }
      out << ',' << rec.skipped_blocks << ',';
      if (rec.ok && rec.free_weight_error) out << format_double(*rec.free_weight_error);
      for (Index k = 0; k < p; ++k) {
        out << ',';
        if (rec.ok && k < rec.weights.size()) out << format_double(rec.weights(k));
      }
      out << '\n';
    }
  }
}

void write_spread_csv(std::ostream& out, const std::vector<LabeledRun>& runs) {
  out << "n,estimator,asset_index,true_weight,mean_est_weight,std_est_weight\n";
  for (const auto& run : runs) {
    for (const auto& s : run.result->summaries) {
      for (Index k = 0; k < s.true_weights.size(); ++k) {
        out << run.n << ',' << s.estimator << ',' << (k + 1) << ',' << format_double(s.true_weights(k))
            << ',' << format_double(s.per_asset_mean_weight(k)) << ','
            << format_double(s.per_asset_std_error(k)) << '\n';
      }
    }
  }
}

void write_scaling_csv(std::ostream& out, const ScalingFit& fit) {
  out << "n,median_error,failure_rate,theorem_band_fraction\n";
  for (const auto& pt : fit.points) {
    out << pt.n << ',' << format_double(pt.median_error) << ',' << format_double(pt.failure_rate) << ',';
    if (pt.theorem_band_fraction) out << format_double(*pt.theorem_band_fraction);
    out << '\n';
  }
}

nlohmann::json to_json(const Vector<double>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

nlohmann::json to_json(const TrialConfig& config) {
  nlohmann::json estimators = nlohmann::json::array();
  for (const auto& e : config.estimators) estimators.push_back(e.tag());
  return {{"p", config.p},
          {"n", config.n},
          {"sigma", config.eigen.to_string()},
          {"basis", to_string(config.basis)},
          {"noise", to_string(config.noise)},
          {"trials", config.trials},
          {"seed", config.seed},
          {"estimators", estimators}};
}

nlohmann::json to_json(const ErrorSummary& s) {
  return {{"estimator", s.estimator},
          {"trials_ok", s.trials_ok},
          {"failures", s.failures},
          {"mse", s.mse},
          {"mean_abs_error", s.mean_abs_error},
          {"median_abs_error", s.median_abs_error},
          {"risk_underestimate_freq", s.risk_underestimate_freq},
          {"true_risk", s.true_risk},
          {"true_weights", to_json(s.true_weights)},
          {"per_asset_mean_weight", to_json(s.per_asset_mean_weight)},
          {"per_asset_mean_error", to_json(s.per_asset_mean_error)},
          {"per_asset_std_error", to_json(s.per_asset_std_error)}};
}

nlohmann::json to_json(const ScalingFit& fit) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& pt : fit.points) {
    nlohmann::json j = {{"n", pt.n}, {"median_error", pt.median_error}, {"failure_rate", pt.failure_rate}};
    j["theorem_band_fraction"] =
        pt.theorem_band_fraction ? nlohmann::json(*pt.theorem_band_fraction) : nlohmann::json(nullptr);
    points.push_back(j);
  }
  return {{"estimator", fit.estimator},
          {"n_grid", fit.n_grid},
          {"median_errors", fit.median_errors},
          {"loglog_slope", fit.loglog_slope},
          {"slope_stderr", fit.slope_stderr},
          {"theorem_constant", fit.theorem_constant},
          {"points", points}};
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace locov::io
