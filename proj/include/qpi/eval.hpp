#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "qpi/common.hpp"
#include "qpi/data.hpp"
#include "qpi/train.hpp"

// Backtest diagnostics: empirical coverage, rogue medians, crossings,
// nesting checks, and flat-file emission of reports and plot data.

namespace qpi {

struct CoverageReport {
  double nominal_width = 0.0;  // the beta the intervals were built for
  double success_rate = 0.0;   // fraction of actuals inside [lower, upper]
  double mean_width = 0.0;
  double rogue_rate = 0.0;  // fraction of medians outside their own interval
  long crossing_count = 0;  // intervals with upper < lower
  long n = 0;
};

// Interval endpoints count as covered. A rogue point has its median strictly
// outside the closed interval; a crossing has upper strictly below lower.
inline CoverageReport coverage(const std::vector<BacktestPoint>& points) {
  if (points.empty()) throw ConfigError("coverage: empty backtest list");
  CoverageReport r;
  r.nominal_width = points.front().interval.spec.beta;
  r.n = long(points.size());
  long hits = 0, rogues = 0, crossings = 0;
  double width_sum = 0.0;
  for (const auto& p : points) {
    const auto& iv = p.interval;
    if (iv.lower <= p.actual && p.actual <= iv.upper) ++hits;
    if (iv.median < iv.lower || iv.median > iv.upper) ++rogues;
    if (iv.upper < iv.lower) ++crossings;
    width_sum += iv.upper - iv.lower;
  }
  r.success_rate = double(hits) / double(r.n);
  r.rogue_rate = double(rogues) / double(r.n);
  r.mean_width = width_sum / double(r.n);
  r.crossing_count = crossings;
  return r;
}

namespace detail {
inline void check_alignment(const std::vector<BacktestSeries>& series_list, bool check_centre) {
  const auto& first = series_list.front().points;
  for (const auto& sl : series_list) {
    if (sl.points.size() != first.size())
      throw DataError(DataErrorKind::misaligned, "per-spec backtest lists differ in length");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (sl.points[i].timestamp != first[i].timestamp)
        throw DataError(DataErrorKind::misaligned,
                        "per-spec backtest lists differ at timestamp index " + std::to_string(i));
      if (check_centre && (sl.points[i].actual != first[i].actual ||
                           sl.points[i].interval.median != first[i].interval.median))
        throw DataError(DataErrorKind::misaligned,
                        "actual/median columns differ across specs at index " +
                            std::to_string(i));
    }
  }
}
}  // namespace detail

// Counts timestamps where a narrower nominal interval is strictly wider than
// a broader one. Quantile models trained independently per level can produce
// these; the count is a cheap sanity signal on a backtest.
inline long nesting_violations(const std::vector<BacktestSeries>& series_list) {
  if (series_list.empty()) throw ConfigError("nesting_violations: empty input");
  detail::check_alignment(series_list, /*check_centre=*/false);
  const std::size_t n = series_list.front().points.size();
  long count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool violated = false;
    for (const auto& narrow : series_list) {
      for (const auto& wide : series_list) {
        if (!(narrow.spec.beta < wide.spec.beta)) continue;
        const auto& a = narrow.points[i].interval;
        const auto& b = wide.points[i].interval;
        if ((a.upper - a.lower) > (b.upper - b.lower)) violated = true;
      }
    }
    if (violated) ++count;
  }
  return count;
}

struct ReportMeta {
  std::uint64_t seed = 0;
  std::string config_hash;
};

enum class ReportFormat { json, csv };

namespace detail {

inline void append_report_json(std::string& out, const CoverageReport& r, const ReportMeta& meta,
                               const std::string& indent) {
  out += indent + "{\n";
  out += indent + "  \"format_version\": 1,\n";
  out += indent + "  \"nominal_width\": " + format_double_full(r.nominal_width) + ",\n";
  out += indent + "  \"success_rate\": " + format_double_full(r.success_rate) + ",\n";
  out += indent + "  \"mean_width\": " + format_double_full(r.mean_width) + ",\n";
  out += indent + "  \"rogue_rate\": " + format_double_full(r.rogue_rate) + ",\n";
  out += indent + "  \"crossing_count\": " + std::to_string(r.crossing_count) + ",\n";
  out += indent + "  \"n\": " + std::to_string(r.n) + ",\n";
  out += indent + "  \"meta\": { \"seed\": " + std::to_string(meta.seed) +
         ", \"config_hash\": \"" + meta.config_hash + "\" }\n";
  out += indent + "}";
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::io, "cannot open '" + path + "' for writing");
  out << body;
  out.flush();
  if (!out) throw DataError(DataErrorKind::io, "write to '" + path + "' failed");
}

}  // namespace detail

// Writes one report as a JSON object (or several as an array), or as CSV
// rows. All rates carry 17 significant digits; nothing time- or
// machine-dependent is emitted, so reruns are byte-identical.
inline void emit_report(const std::vector<CoverageReport>& reports, const ReportMeta& meta,
                        const std::string& path, ReportFormat format) {
  if (reports.empty()) throw ConfigError("emit_report: empty report list");
  std::string body;
  if (format == ReportFormat::json) {
    if (reports.size() == 1) {
      detail::append_report_json(body, reports.front(), meta, "");
      body += "\n";
    } else {
      body += "[\n";
      for (std::size_t i = 0; i < reports.size(); ++i) {
        detail::append_report_json(body, reports[i], meta, "  ");
        body += i + 1 < reports.size() ? ",\n" : "\n";
      }
      body += "]\n";
    }
  } else {
    body += "nominal_width,success_rate,mean_width,rogue_rate,crossing_count,n,seed,config_hash\n";
    for (const auto& r : reports) {
      body += format_double_full(r.nominal_width) + ',' + format_double_full(r.success_rate) +
              ',' + format_double_full(r.mean_width) + ',' + format_double_full(r.rogue_rate) +
              ',' + std::to_string(r.crossing_count) + ',' + std::to_string(r.n) + ',' +
              std::to_string(meta.seed) + ',' + meta.config_hash + '\n';
    }
  }
  detail::write_text_file(path, body);
}

inline void emit_report(const CoverageReport& report, const ReportMeta& meta,
                        const std::string& path, ReportFormat format) {
  emit_report(std::vector<CoverageReport>{report}, meta, path, format);
}

// Plot-ready CSV: t, actual, median, then lower/upper per spec. All specs
// must share timestamps, actuals and medians (one centre model).
inline void emit_plot_data(const std::vector<BacktestSeries>& series_list,
                           const std::string& path) {
  if (series_list.empty() || series_list.front().points.empty())
    throw ConfigError("emit_plot_data: empty backtest list");
  detail::check_alignment(series_list, /*check_centre=*/true);

  std::string body = "t,actual,median";
  for (const auto& sl : series_list) {
    const std::string suffix = format_double(sl.spec.beta);
    body += ",lower_" + suffix + ",upper_" + suffix;
  }
  body += '\n';
  const auto& first = series_list.front().points;
  for (std::size_t i = 0; i < first.size(); ++i) {
    body += std::to_string(first[i].timestamp) + ',' + format_double_full(first[i].actual) + ',' +
            format_double_full(first[i].interval.median);
    for (const auto& sl : series_list) {
      body += ',' + format_double_full(sl.points[i].interval.lower) + ',' +
              format_double_full(sl.points[i].interval.upper);
    }
    body += '\n';
  }
  detail::write_text_file(path, body);
}

// Inverse of emit_plot_data; a load of an emitted file reproduces every
// interval exactly.
inline std::vector<BacktestSeries> load_plot_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::missing_file, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw DataError(DataErrorKind::empty_input, "'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = detail::split_csv_line(line);
  if (header.size() < 5 || header[0] != "t" || header[1] != "actual" || header[2] != "median" ||
      (header.size() - 3) % 2 != 0)
    throw DataError(DataErrorKind::schema,
                    "'" + path + "': expected header t,actual,median,lower_B,upper_B,...");

  std::vector<BacktestSeries> out;
  for (std::size_t j = 3; j + 1 < header.size(); j += 2) {
    const std::string& lo = header[j];
    const std::string& hi = header[j + 1];
    if (lo.rfind("lower_", 0) != 0 || hi.rfind("upper_", 0) != 0 ||
        lo.substr(6) != hi.substr(6))
      throw DataError(DataErrorKind::schema,
                      "'" + path + "': mismatched interval columns '" + lo + "', '" + hi + "'");
    double beta = 0.0;
    const std::string tag = lo.substr(6);
    auto res = std::from_chars(tag.data(), tag.data() + tag.size(), beta);
    if (res.ec != std::errc{} || res.ptr != tag.data() + tag.size())
      throw DataError(DataErrorKind::schema, "'" + path + "': bad interval width '" + tag + "'");
    try {
      out.push_back(BacktestSeries{IntervalSpec(beta), {}});
    } catch (const ConfigError& e) {
      throw DataError(DataErrorKind::schema, "'" + path + "': " + e.what());
    }
  }

  int line_no = 1;
  long long prev_t = 0;
  bool have_prev = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError(DataErrorKind::malformed_row,
                      "line " + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " columns, got " +
                          std::to_string(cells.size()));
    const long long t = detail::parse_csv_timestamp(cells[0], line_no);
    if (have_prev && t <= prev_t)
      throw DataError(DataErrorKind::non_increasing_timestamps,
                      "line " + std::to_string(line_no) + ": timestamps must increase");
    prev_t = t;
    have_prev = true;
    const double actual = detail::parse_csv_double(cells[1], line_no, "actual");
    const double median = detail::parse_csv_double(cells[2], line_no, "median");
    for (std::size_t si = 0; si < out.size(); ++si) {
      BacktestPoint p;
      p.timestamp = t;
      p.actual = actual;
      p.interval.median = median;
      p.interval.lower = detail::parse_csv_double(cells[3 + 2 * si], line_no, header[3 + 2 * si]);
      p.interval.upper =
          detail::parse_csv_double(cells[4 + 2 * si], line_no, header[4 + 2 * si]);
      p.interval.spec = out[si].spec;
      out[si].points.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace qpi
