#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qpi/common.hpp"
#include "qpi/oracle.hpp"

// Tabular containers, windowing, synthetic generators and CSV I/O.

namespace qpi {

struct Sample {
  std::vector<double> features;
  double target = 0.0;
};

struct Dataset {
  std::vector<Sample> samples;
  int feature_dim = 0;
  std::vector<std::string> feature_names;

  std::size_t size() const { return samples.size(); }

  void validate() const {
    if (int(feature_names.size()) != feature_dim)
      throw ConfigError("dataset: feature_names length does not match feature_dim");
    for (const auto& s : samples)
      if (int(s.features.size()) != feature_dim)
        throw ConfigError("dataset: sample feature length does not match feature_dim");
  }
};

// A univariate series on integer day indices plus named exogenous columns.
struct SeriesFrame {
  std::vector<long long> timestamps;  // strictly increasing
  std::vector<double> values;
  std::vector<std::string> exo_names;
  std::vector<std::vector<double>> exo;  // exo[j] is a full column

  std::size_t size() const { return values.size(); }

  void validate() const {
    if (timestamps.size() != values.size())
      throw DataError(DataErrorKind::misaligned, "series: timestamps/values length mismatch");
    if (exo.size() != exo_names.size())
      throw DataError(DataErrorKind::misaligned, "series: exogenous columns/names mismatch");
    for (const auto& col : exo)
      if (col.size() != values.size())
        throw DataError(DataErrorKind::misaligned, "series: exogenous column length mismatch");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
      if (timestamps[i] <= timestamps[i - 1])
        throw DataError(DataErrorKind::non_increasing_timestamps,
                        "series: timestamps must be strictly increasing");
  }
};

// Supervised windows over a series: each sample holds the `window` most
// recent values (oldest first) plus the exogenous columns at the target row;
// the target sits `horizon` rows past the window's end. Produces
// size - window - horizon + 1 samples.
inline Dataset make_windows(const SeriesFrame& series, int window, int horizon) {
  if (window < 1) throw ConfigError("make_windows: window must be >= 1");
  if (horizon < 1) throw ConfigError("make_windows: horizon must be >= 1");
  series.validate();
  const long n = long(series.size());
  if (n < long(window) + long(horizon))
    throw DataError(DataErrorKind::insufficient_data,
                    "make_windows: series of length " + std::to_string(n) +
                        " is shorter than window + horizon = " +
                        std::to_string(window + horizon));

  Dataset ds;
  ds.feature_dim = window + int(series.exo.size());
  ds.feature_names.reserve(std::size_t(ds.feature_dim));
  for (int j = 0; j < window; ++j)
    ds.feature_names.push_back("lag_" + std::to_string(window + horizon - 1 - j));
  for (const auto& name : series.exo_names) ds.feature_names.push_back(name);

  const long count = n - window - horizon + 1;
  ds.samples.reserve(std::size_t(count));
  for (long k = 0; k < count; ++k) {
    const long t = k + window + horizon - 1;
    Sample s;
    s.features.reserve(std::size_t(ds.feature_dim));
    for (long j = k; j < k + window; ++j) s.features.push_back(series.values[std::size_t(j)]);
    for (const auto& col : series.exo) s.features.push_back(col[std::size_t(t)]);
    s.target = series.values[std::size_t(t)];
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Linear ground truth with additive noise: y = y0 + w.x + eps, features
// uniform on [-1, 1]^d. Handy because the best alpha-quantile model is known
// in closed form (slope w, intercept y0 + noise quantile).
inline Dataset gen_linear(std::size_t n, double y0, std::span<const double> w,
                          const DistributionSpec& noise, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gen_linear: n must be >= 1");
  if (w.empty()) throw ConfigError("gen_linear: weight vector must be nonempty");

  Dataset ds;
  ds.feature_dim = int(w.size());
  for (std::size_t j = 0; j < w.size(); ++j)
    ds.feature_names.push_back("x" + std::to_string(j + 1));

  auto feat_eng = rng::make_engine(seed, rng::stream_features);
  Sampler noise_src(noise, seed);
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.features.reserve(w.size());
    double dot = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double x = rng::uniform(feat_eng, -1.0, 1.0);
      s.features.push_back(x);
      dot += w[j] * x;
    }
    s.target = y0 + dot + noise_src.next();
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Non-negative synthetic demand series:
//   value(t) = max(0, base + trend*t + amplitude*sin(2*pi*(t%period)/period) + eps_t)
// with Laplace noise. When heteroscedastic, the noise scale grows with the
// deterministic level, mimicking busy days being harder to predict.
// Exogenous columns: one-hot day-of-period and a periodic "special day" flag
// (every 30th day); the flag is informational only and does not enter the
// value formula.
inline SeriesFrame gen_sales_series(int days, int period, double base, double amplitude,
                                    double trend, double noise_scale, bool heteroscedastic,
                                    std::uint64_t seed) {
  if (period < 1) throw ConfigError("gen_sales_series: period must be >= 1");
  if (days < 2 * period)
    throw ConfigError("gen_sales_series: days must be >= 2 * period, got " +
                      std::to_string(days));
  if (!(noise_scale > 0.0)) throw ConfigError("gen_sales_series: noise_scale must be positive");

  SeriesFrame f;
  f.timestamps.reserve(std::size_t(days));
  f.values.reserve(std::size_t(days));
  for (int j = 0; j < period; ++j) f.exo_names.push_back("dow_" + std::to_string(j));
  f.exo_names.push_back("special");
  f.exo.assign(f.exo_names.size(), std::vector<double>(std::size_t(days), 0.0));

  Sampler z_src(DistributionSpec(DistKind::laplace, 0.0, 1.0), seed);
  for (int t = 0; t < days; ++t) {
    const int dow = t % period;
    const double det =
        base + trend * double(t) + amplitude * std::sin(2.0 * std::numbers::pi * dow / period);
    double scale_t = noise_scale;
    if (heteroscedastic) scale_t *= 1.0 + std::max(det, 0.0) / (std::abs(base) + 1.0);
    f.timestamps.push_back(t);
    f.values.push_back(std::max(0.0, det + scale_t * z_src.next()));
    f.exo[std::size_t(dow)][std::size_t(t)] = 1.0;
    if (t % 30 == 0) f.exo.back()[std::size_t(t)] = 1.0;
  }
  return f;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

inline double parse_csv_double(const std::string& cell, int line_no, const std::string& col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(v))
    throw DataError(DataErrorKind::non_numeric_cell,
                    "line " + std::to_string(line_no) + ": cell '" + cell + "' in column '" +
                        col + "' is not a finite number");
  return v;
}

inline long long parse_csv_timestamp(const std::string& cell, int line_no) {
  long long v = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError(DataErrorKind::non_numeric_cell,
                    "line " + std::to_string(line_no) + ": cell '" + cell +
                        "' in column 't' is not an integer timestamp");
  return v;
}

}  // namespace detail

// Header is `t,y[,name...]`. Values written with 17 significant digits, so a
// load after save reproduces every double exactly.
inline void save_csv(const SeriesFrame& series, const std::string& path) {
  series.validate();
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::io, "cannot open '" + path + "' for writing");
  out << "t,y";
  for (const auto& name : series.exo_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << series.timestamps[i] << ',' << format_double_full(series.values[i]);
    for (const auto& col : series.exo) out << ',' << format_double_full(col[i]);
    out << '\n';
  }
  out.flush();
  if (!out) throw DataError(DataErrorKind::io, "write to '" + path + "' failed");
}

inline SeriesFrame load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::missing_file, "cannot open '" + path + "'");

  auto next_line = [&in](std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  std::string line;
  if (!next_line(line) || line.empty())
    throw DataError(DataErrorKind::empty_input, "'" + path + "' is empty");

  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "t" || header[1] != "y")
    throw DataError(DataErrorKind::schema,
                    "'" + path + "': header must start with 't,y', got '" + line + "'");

  SeriesFrame f;
  f.exo_names.assign(header.begin() + 2, header.end());
  f.exo.assign(f.exo_names.size(), {});

  int line_no = 1;
  while (next_line(line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;  // tolerate one trailing newline
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError(DataErrorKind::malformed_row,
                      "line " + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " columns, got " +
                          std::to_string(cells.size()));
    const long long t = detail::parse_csv_timestamp(cells[0], line_no);
    if (!f.timestamps.empty() && t <= f.timestamps.back())
      throw DataError(DataErrorKind::non_increasing_timestamps,
                      "line " + std::to_string(line_no) + ": timestamp " + std::to_string(t) +
                          " does not increase over " + std::to_string(f.timestamps.back()));
    f.timestamps.push_back(t);
    f.values.push_back(detail::parse_csv_double(cells[1], line_no, "y"));
    for (std::size_t j = 0; j < f.exo.size(); ++j)
      f.exo[j].push_back(detail::parse_csv_double(cells[j + 2], line_no, f.exo_names[j]));
  }
  return f;
}

// Column-wise standardisation statistics. Variance is floored at 1e-12 so a
// constant column maps to (numerically) all zeros instead of dividing by 0.
struct NormStats {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;
};

inline std::pair<Dataset, NormStats> normalize(const Dataset& ds) {
  if (ds.samples.empty()) throw ConfigError("normalize: empty dataset");
  ds.validate();
  const double n = double(ds.size());
  NormStats st;
  st.feature_mean.assign(std::size_t(ds.feature_dim), 0.0);
  st.feature_std.assign(std::size_t(ds.feature_dim), 0.0);

  for (const auto& s : ds.samples) {
    for (int j = 0; j < ds.feature_dim; ++j) st.feature_mean[std::size_t(j)] += s.features[std::size_t(j)];
    st.target_mean += s.target;
  }
  for (auto& m : st.feature_mean) m /= n;
  st.target_mean /= n;

  double tvar = 0.0;
  for (const auto& s : ds.samples) {
    for (int j = 0; j < ds.feature_dim; ++j) {
      const double d = s.features[std::size_t(j)] - st.feature_mean[std::size_t(j)];
      st.feature_std[std::size_t(j)] += d * d;
    }
    const double d = s.target - st.target_mean;
    tvar += d * d;
  }
  for (auto& v : st.feature_std) v = std::sqrt(std::max(v / n, 1e-12));
  st.target_std = std::sqrt(std::max(tvar / n, 1e-12));

  Dataset out;
  out.feature_dim = ds.feature_dim;
  out.feature_names = ds.feature_names;
  out.samples.reserve(ds.size());
  for (const auto& s : ds.samples) {
    Sample ns;
    ns.features.reserve(s.features.size());
    for (int j = 0; j < ds.feature_dim; ++j)
      ns.features.push_back((s.features[std::size_t(j)] - st.feature_mean[std::size_t(j)]) /
                            st.feature_std[std::size_t(j)]);
    ns.target = (s.target - st.target_mean) / st.target_std;
    out.samples.push_back(std::move(ns));
  }
  return {std::move(out), std::move(st)};
}

inline std::vector<double> normalize_features(std::span<const double> x, const NormStats& st) {
  if (x.size() != st.feature_mean.size())
    throw ConfigError("normalize_features: got " + std::to_string(x.size()) +
                      " features, stats carry " + std::to_string(st.feature_mean.size()));
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - st.feature_mean[j]) / st.feature_std[j];
  return out;
}

inline double normalize_target(double y, const NormStats& st) {
  return (y - st.target_mean) / st.target_std;
}

// Inverse of the target map; predictions come back in raw units.
inline double denormalize_prediction(double v, const NormStats& st) {
  return v * st.target_std + st.target_mean;
}

}  // namespace qpi
