#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpi/eval.hpp"
#include "qpi/oracle.hpp"
#include "support/subprocess.hpp"

using qpi::BacktestPoint;
using qpi::BacktestSeries;
using qpi::ConfigError;
using qpi::CoverageReport;
using qpi::DataError;
using qpi::DataErrorKind;
using qpi::IntervalSpec;
using qpi::ReportMeta;

namespace {

BacktestPoint pt(long long t, double lower, double median, double upper, double actual,
                 double beta = 0.8) {
  BacktestPoint p;
  p.timestamp = t;
  p.actual = actual;
  p.interval.lower = lower;
  p.interval.median = median;
  p.interval.upper = upper;
  p.interval.spec = IntervalSpec(beta);
  return p;
}

DataErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.kind();
  }
  FAIL("expected a data error");
  return DataErrorKind::io;
}

}  // namespace

TEST_CASE("coverage counts hits, rogues and crossings") {
  std::vector<BacktestPoint> pts;
  pts.push_back(pt(0, 0.0, 5.0, 10.0, 5.0));    // inside
  pts.push_back(pt(1, 0.0, 5.0, 10.0, 0.0));    // on the lower endpoint: covered
  pts.push_back(pt(2, 0.0, 5.0, 10.0, 10.0));   // on the upper endpoint: covered
  pts.push_back(pt(3, 0.0, 5.0, 10.0, -0.001)); // just outside
  pts.push_back(pt(4, 0.0, 11.0, 10.0, 3.0));   // rogue median, actual inside
  // A crossed interval leaves no room inside, so its median is rogue too.
  pts.push_back(pt(5, 6.0, 5.5, 4.0, 5.0));
  pts.push_back(pt(6, 2.0, 2.0, 2.0, 2.0));     // degenerate interval still covers its point

  const auto r = qpi::coverage(pts);
  REQUIRE(r.n == 7);
  REQUIRE(r.nominal_width == 0.8);
  REQUIRE(r.success_rate == Catch::Approx(5.0 / 7.0).margin(1e-12));
  REQUIRE(r.rogue_rate == Catch::Approx(2.0 / 7.0).margin(1e-12));
  REQUIRE(r.crossing_count == 1);
  const double widths = 10.0 * 4 + 10.0 + (4.0 - 6.0) + 0.0;
  REQUIRE(r.mean_width == Catch::Approx(widths / 7.0).margin(1e-12));

  // A median sitting exactly on an endpoint is not rogue.
  std::vector<BacktestPoint> edge{pt(0, 1.0, 1.0, 3.0, 2.0)};
  REQUIRE(qpi::coverage(edge).rogue_rate == 0.0);

  REQUIRE_THROWS_AS(qpi::coverage({}), ConfigError);
}

TEST_CASE("coverage matches nominal width for calibrated intervals") {
  const qpi::DistributionSpec d(qpi::DistKind::gaussian, 0.0, 1.0);
  const double lo = qpi::analytic_quantile(d, qpi::QuantileLevel(0.1));
  const double hi = qpi::analytic_quantile(d, qpi::QuantileLevel(0.9));
  const auto draws = qpi::sample(d, 2000, 31);
  std::vector<BacktestPoint> pts;
  for (std::size_t i = 0; i < draws.size(); ++i)
    pts.push_back(pt((long long)(i), lo, 0.0, hi, draws[i]));
  const auto r = qpi::coverage(pts);
  REQUIRE(r.success_rate == Catch::Approx(0.8).margin(0.03));
  REQUIRE(r.rogue_rate == 0.0);
  REQUIRE(r.crossing_count == 0);
}

TEST_CASE("intervals swallowing the whole range cover everything") {
  const auto draws = qpi::sample({qpi::DistKind::laplace, 3.0, 2.0}, 500, 9);
  const auto [mn, mx] = std::minmax_element(draws.begin(), draws.end());
  std::vector<BacktestPoint> pts;
  for (std::size_t i = 0; i < draws.size(); ++i)
    pts.push_back(pt((long long)(i), *mn - 1.0, 3.0, *mx + 1.0, draws[i]));
  REQUIRE(qpi::coverage(pts).success_rate == 1.0);
}

TEST_CASE("nesting violations compare widths across nominal levels") {
  BacktestSeries narrow{IntervalSpec(0.7), {}};
  BacktestSeries wide{IntervalSpec(0.9), {}};
  // t=0: nested properly. t=1: the 0.7 interval is wider than the 0.9 one.
  narrow.points.push_back(pt(0, 2.0, 5.0, 8.0, 5.0, 0.7));
  wide.points.push_back(pt(0, 0.0, 5.0, 10.0, 5.0, 0.9));
  narrow.points.push_back(pt(1, 0.0, 5.0, 10.0, 5.0, 0.7));
  wide.points.push_back(pt(1, 2.0, 5.0, 3.0, 5.0, 0.9));

  REQUIRE(qpi::nesting_violations({narrow, wide}) == 1);
  REQUIRE(qpi::nesting_violations({wide, narrow}) == 1);  // order must not matter
  REQUIRE(qpi::nesting_violations({narrow}) == 0);        // nothing to compare

  BacktestSeries shifted = wide;
  shifted.points[1].timestamp = 99;
  REQUIRE(kind_of([&] { qpi::nesting_violations({narrow, shifted}); }) ==
          DataErrorKind::misaligned);

  BacktestSeries shorter = wide;
  shorter.points.pop_back();
  REQUIRE(kind_of([&] { qpi::nesting_violations({narrow, shorter}); }) ==
          DataErrorKind::misaligned);

  REQUIRE_THROWS_AS(qpi::nesting_violations({}), ConfigError);
}

TEST_CASE("json report emission is exact and stable") {
  testsupport::TempDir dir("qpi_test_eval_json");
  CoverageReport r;
  r.nominal_width = 0.75;
  r.success_rate = 1.0 / 3.0;
  r.mean_width = 31.5;
  r.rogue_rate = 0.01;
  r.crossing_count = 2;
  r.n = 100;
  ReportMeta meta{7, "deadbeef"};

  const auto path = dir.str("report.json");
  qpi::emit_report(r, meta, path, qpi::ReportFormat::json);

  const auto body = testsupport::read_file(path);
  // Rates carry every meaningful digit.
  REQUIRE(body.find("0.33333333333333331") != std::string::npos);

  const auto j = nlohmann::json::parse(body);
  REQUIRE(j["format_version"] == 1);
  REQUIRE(j["nominal_width"].get<double>() == 0.75);
  REQUIRE(j["success_rate"].get<double>() == 1.0 / 3.0);  // exact round trip
  REQUIRE(j["mean_width"].get<double>() == 31.5);
  REQUIRE(j["rogue_rate"].get<double>() == 0.01);
  REQUIRE(j["crossing_count"] == 2);
  REQUIRE(j["n"] == 100);
  REQUIRE(j["meta"]["seed"] == 7);
  REQUIRE(j["meta"]["config_hash"] == "deadbeef");

  // Re-emission is byte-identical.
  const auto path2 = dir.str("report2.json");
  qpi::emit_report(r, meta, path2, qpi::ReportFormat::json);
  REQUIRE(testsupport::files_identical(path, path2));
}

TEST_CASE("multi-report json is an array") {
  testsupport::TempDir dir("qpi_test_eval_json_multi");
  CoverageReport a;
  a.nominal_width = 0.5;
  a.n = 10;
  CoverageReport b;
  b.nominal_width = 0.9;
  b.n = 10;
  const auto path = dir.str("reports.json");
  qpi::emit_report(std::vector<CoverageReport>{a, b}, ReportMeta{1, "x"}, path,
                   qpi::ReportFormat::json);
  const auto j = nlohmann::json::parse(testsupport::read_file(path));
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 2);
  REQUIRE(j[0]["nominal_width"].get<double>() == 0.5);
  REQUIRE(j[1]["nominal_width"].get<double>() == 0.9);
}

TEST_CASE("csv report emission") {
  testsupport::TempDir dir("qpi_test_eval_csv");
  CoverageReport r;
  r.nominal_width = 0.8;
  r.success_rate = 0.775;
  r.mean_width = 12.25;
  r.rogue_rate = 0.0;
  r.crossing_count = 0;
  r.n = 200;
  const auto path = dir.str("report.csv");
  qpi::emit_report(r, ReportMeta{42, "beef"}, path, qpi::ReportFormat::csv);

  const auto body = testsupport::read_file(path);
  REQUIRE(body ==
          "nominal_width,success_rate,mean_width,rogue_rate,crossing_count,n,seed,config_hash\n"
          "0.80000000000000004,0.77500000000000002,12.25,0,0,200,42,beef\n");
}

TEST_CASE("emit_report refuses an empty list and leaves no file behind") {
  testsupport::TempDir dir("qpi_test_eval_empty");
  const auto path = dir.str("report.json");
  REQUIRE_THROWS_AS(qpi::emit_report(std::vector<CoverageReport>{}, ReportMeta{}, path,
                                     qpi::ReportFormat::json),
                    ConfigError);
  REQUIRE_FALSE(std::filesystem::exists(path));
}

TEST_CASE("plot data round trip") {
  testsupport::TempDir dir("qpi_test_eval_plot");
  BacktestSeries s7{IntervalSpec(0.7), {}};
  BacktestSeries s9{IntervalSpec(0.9), {}};
  auto eng = qpi::rng::make_engine(401);
  for (int t = 0; t < 25; ++t) {
    const double med = qpi::rng::uniform(eng, -5, 5);
    const double act = med + qpi::rng::uniform(eng, -2, 2);
    s7.points.push_back(pt(100 + t, med - 1.0 / 3.0, med, med + 1.0 / 7.0, act, 0.7));
    s9.points.push_back(pt(100 + t, med - 2.0 / 3.0, med, med + 2.0 / 7.0, act, 0.9));
  }

  const auto path = dir.str("plotdata.csv");
  qpi::emit_plot_data({s7, s9}, path);

  const auto body = testsupport::read_file(path);
  REQUIRE(body.rfind("t,actual,median,lower_0.7,upper_0.7,lower_0.9,upper_0.9\n", 0) == 0);

  const auto loaded = qpi::load_plot_data(path);
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded[0].spec.beta == 0.7);
  REQUIRE(loaded[1].spec.beta == 0.9);
  for (std::size_t i = 0; i < s7.points.size(); ++i) {
    REQUIRE(loaded[0].points[i].timestamp == s7.points[i].timestamp);
    REQUIRE(loaded[0].points[i].actual == s7.points[i].actual);
    REQUIRE(loaded[0].points[i].interval.median == s7.points[i].interval.median);
    REQUIRE(loaded[0].points[i].interval.lower == s7.points[i].interval.lower);
    REQUIRE(loaded[0].points[i].interval.upper == s7.points[i].interval.upper);
    REQUIRE(loaded[1].points[i].interval.lower == s9.points[i].interval.lower);
    REQUIRE(loaded[1].points[i].interval.upper == s9.points[i].interval.upper);
  }

  // Emit of the loaded data reproduces the file byte for byte.
  const auto path2 = dir.str("plotdata2.csv");
  qpi::emit_plot_data(loaded, path2);
  REQUIRE(testsupport::files_identical(path, path2));
}

TEST_CASE("plot data emission rejects misaligned inputs") {
  BacktestSeries a{IntervalSpec(0.5), {}};
  BacktestSeries b{IntervalSpec(0.9), {}};
  a.points.push_back(pt(0, 1, 2, 3, 2, 0.5));
  b.points.push_back(pt(0, 1, 2.5, 3, 2, 0.9));  // different median
  testsupport::TempDir dir("qpi_test_eval_misaligned");
  REQUIRE(kind_of([&] { qpi::emit_plot_data({a, b}, dir.str("x.csv")); }) ==
          DataErrorKind::misaligned);
  REQUIRE_THROWS_AS(qpi::emit_plot_data({}, dir.str("x.csv")), ConfigError);
}

TEST_CASE("plot data loader failure modes") {
  testsupport::TempDir dir("qpi_test_eval_plot_err");
  const auto at = [&](const std::string& name, const std::string& body) {
    const auto p = dir.str(name);
    testsupport::write_file(p, body);
    return p;
  };

  REQUIRE(kind_of([&] { qpi::load_plot_data(dir.str("nope.csv")); }) ==
          DataErrorKind::missing_file);
  REQUIRE(kind_of([&] { qpi::load_plot_data(at("empty.csv", "")); }) ==
          DataErrorKind::empty_input);
  REQUIRE(kind_of([&] { qpi::load_plot_data(at("h1.csv", "a,b,c\n")); }) ==
          DataErrorKind::schema);
  REQUIRE(kind_of([&] {
            qpi::load_plot_data(at("h2.csv", "t,actual,median,lower_0.7,upper_0.8\n"));
          }) == DataErrorKind::schema);
  REQUIRE(kind_of([&] {
            qpi::load_plot_data(at("h3.csv", "t,actual,median,lower_x,upper_x\n"));
          }) == DataErrorKind::schema);
  REQUIRE(kind_of([&] {
            qpi::load_plot_data(at("h4.csv", "t,actual,median,lower_2,upper_2\n"));
          }) == DataErrorKind::schema);
  REQUIRE(kind_of([&] {
            qpi::load_plot_data(
                at("row.csv", "t,actual,median,lower_0.5,upper_0.5\n1,2,3,4\n"));
          }) == DataErrorKind::malformed_row);
  REQUIRE(kind_of([&] {
            qpi::load_plot_data(
                at("cell.csv", "t,actual,median,lower_0.5,upper_0.5\n1,2,x,4,5\n"));
          }) == DataErrorKind::non_numeric_cell);
  REQUIRE(kind_of([&] {
            qpi::load_plot_data(at("ts.csv",
                                   "t,actual,median,lower_0.5,upper_0.5\n"
                                   "2,1,1,0,2\n2,1,1,0,2\n"));
          }) == DataErrorKind::non_increasing_timestamps);
}
