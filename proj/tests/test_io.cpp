#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "locov/io.hpp"

using namespace locov;
using namespace locov::io;

namespace {

ReturnTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_returns_csv(in);
}

template <class F>
void check_parse_error(F&& f, std::size_t row, std::size_t column) {
  try {
    f();
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == row);
    CHECK(e.column() == column);
  }
}

}  // namespace

TEST_CASE("returns CSV with and without a header") {
  const ReturnTable h = parse("AAA,BBB,CCC\n0.1,0.2,0.3\n-0.1,0,1e-3\n");
  CHECK(h.had_header);
  CHECK(h.asset_names == std::vector<std::string>{"AAA", "BBB", "CCC"});
  CHECK(h.returns.entries.rows() == 2);
  CHECK(h.returns.entries.cols() == 3);
  CHECK(h.returns.entries(1, 2) == 1e-3);
  CHECK_FALSE(h.returns.centered);

  const ReturnTable bare = parse("1,2\r\n3,4\r\n\n5, 6\n");
  CHECK_FALSE(bare.had_header);
  CHECK(bare.asset_names == std::vector<std::string>{"1", "2"});
  CHECK(bare.returns.entries.rows() == 3);
  CHECK(bare.returns.entries(2, 1) == 6.0);

  const ReturnTable bom = parse("\xEF\xBB\xBFx,y\n1,2\n3,4\n");
  CHECK(bom.asset_names.front() == "x");
}

TEST_CASE("returns CSV errors carry row and column") {
  check_parse_error([] { parse("a,b\n1,2\n3\n"); }, 3, 0);
  check_parse_error([] { parse("a,b\n1,2\n3,oops\n"); }, 3, 2);
  check_parse_error([] { parse("1,2\n3,nan\n"); }, 2, 2);
  check_parse_error([] { parse("1,2\n,4\n"); }, 2, 1);
  CHECK_THROWS_AS(parse("a,b\n1,2\n"), ParseError);  // one sample row
  CHECK_THROWS_AS(parse("a\n1\n2\n"), ParseError);     // one asset
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(read_returns_csv_file("/nonexistent/returns.csv"), ParseError);
}

TEST_CASE("format_double is lossless") {
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(std::nan("")) == "nan");
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<double>(i % 40 - 20));
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("weights CSV round trip") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index p = 2 + rep;
    Vector<double> w(p);
    std::vector<std::string> names;
    for (Index k = 0; k < p; ++k) {
      w(k) = g(rng);
      names.push_back("asset" + std::to_string(k));
    }
    std::stringstream buf;
    write_weights_csv(buf, names, w);
    const auto back = read_weights_csv(buf);
    REQUIRE(static_cast<Index>(back.size()) == p);
    for (Index k = 0; k < p; ++k) {
      CHECK(back[static_cast<std::size_t>(k)].first == names[static_cast<std::size_t>(k)]);
      CHECK(back[static_cast<std::size_t>(k)].second == w(k));
    }
  }
  std::stringstream bad;
  CHECK_THROWS_AS(write_weights_csv(bad, {"a"}, Vector<double>::Ones(2)), InputError);
  std::istringstream junk("asset,weight\na,b\n");
  check_parse_error([&] { read_weights_csv(junk); }, 2, 2);
}

TEST_CASE("trials and spread CSV layout") {
  TrialConfig cfg;
  cfg.p = 3;
  cfg.n = 2;  // n < p: the sample estimator fails every trial
  cfg.trials = 2;
  cfg.estimators = parse_estimator_list("sample,locov2");
  const ExperimentResult res = run_experiment(cfg);
  std::ostringstream trials, spread;
  write_trials_csv(trials, {{2, &res}});
  write_spread_csv(spread, {{2, &res}});

  std::istringstream lines(trials.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line ==
        "n,trial_id,estimator,status,sample_risk,oracle_risk,mean_abs_error,skipped_blocks,"
        "free_weight_error,w_1,w_2,w_3");
  int rows = 0, failed = 0;
  while (std::getline(lines, line)) {
    ++rows;
    if (line.find(",failed,") != std::string::npos) ++failed;
  }
  CHECK(rows == 4);
  CHECK(failed == 2);
  CHECK(spread.str().rfind("n,estimator,asset_index,true_weight,mean_est_weight,std_est_weight\n", 0) == 0);
}

TEST_CASE("JSON helpers") {
  TrialConfig cfg;
  cfg.eigen = EigenSpec::linspace(1.0, 30.0);
  const auto j = to_json(cfg);
  CHECK(j.at("p") == 30);
  CHECK(j.at("sigma") == "linspace:1:30");
  const auto v = to_json(Vector<double>::Constant(3, 0.5));
  CHECK(v.size() == 3);
  CHECK(v[0].get<double>() == 0.5);
}
