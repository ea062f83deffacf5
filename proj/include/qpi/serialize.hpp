#pragma once

#include <fstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "qpi/common.hpp"
#include "qpi/data.hpp"
#include "qpi/net.hpp"
#include "qpi/train.hpp"

// JSON persistence for model artifacts. nlohmann::json emits doubles in
// shortest-round-trip form and orders keys, so saved files are byte-stable
// and loads reproduce every parameter bit-exactly.

namespace qpi {

inline constexpr int kFormatVersion = 1;

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end())
    throw DataError(DataErrorKind::schema, std::string("missing key '") + key + "'");
  return *it;
}

inline void require_version(const nlohmann::json& j) {
  const auto& v = require_key(j, "format_version");
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion)
    throw DataError(DataErrorKind::schema,
                    "unsupported format_version " + v.dump() + ", expected " +
                        std::to_string(kFormatVersion));
}

inline void check_finite(double v, const char* where) {
  if (!std::isfinite(v))
    throw DataError(DataErrorKind::schema, std::string("non-finite value in ") + where);
}

}  // namespace detail

inline nlohmann::json to_json(const NetworkShape& s) {
  return nlohmann::json{{"input_dim", s.input_dim},
                        {"hidden_layers", s.hidden_layers},
                        {"activation", to_string(s.activation)}};
}

inline NetworkShape shape_from_json(const nlohmann::json& j) {
  NetworkShape s;
  try {
    s.input_dim = detail::require_key(j, "input_dim").get<int>();
    s.hidden_layers = detail::require_key(j, "hidden_layers").get<std::vector<int>>();
    s.activation =
        activation_from_string(detail::require_key(j, "activation").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::schema, std::string("bad network shape: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(DataErrorKind::schema, std::string("bad network shape: ") + e.what());
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw DataError(DataErrorKind::schema, std::string("bad network shape: ") + e.what());
  }
  return s;
}

inline nlohmann::json to_json(const NetworkParams& p) {
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : p.weights)
    weights.push_back(nlohmann::json{{"rows", w.rows}, {"cols", w.cols}, {"data", w.data}});
  return nlohmann::json{{"format_version", kFormatVersion},
                        {"shape", to_json(p.shape)},
                        {"weights", std::move(weights)},
                        {"biases", p.biases}};
}

inline NetworkParams params_from_json(const nlohmann::json& j) {
  detail::require_version(j);
  NetworkParams p;
  p.shape = shape_from_json(detail::require_key(j, "shape"));
  try {
    for (const auto& wj : detail::require_key(j, "weights")) {
      Matrix w;
      w.rows = detail::require_key(wj, "rows").get<int>();
      w.cols = detail::require_key(wj, "cols").get<int>();
      w.data = detail::require_key(wj, "data").get<std::vector<double>>();
      if (w.rows < 0 || w.cols < 0 ||
          w.data.size() != std::size_t(w.rows) * std::size_t(w.cols))
        throw DataError(DataErrorKind::schema, "weight matrix data does not match rows*cols");
      p.weights.push_back(std::move(w));
    }
    p.biases = detail::require_key(j, "biases").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::schema, std::string("bad network params: ") + e.what());
  }

  const auto dims = p.shape.layer_dims();
  if (p.weights.size() + 1 != dims.size() || p.biases.size() != p.weights.size())
    throw DataError(DataErrorKind::schema, "layer count does not match shape");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (p.weights[l].rows != dims[l + 1] || p.weights[l].cols != dims[l] ||
        p.biases[l].size() != std::size_t(dims[l + 1]))
      throw DataError(DataErrorKind::schema,
                      "layer " + std::to_string(l) + " dimensions do not match shape");
    for (double v : p.weights[l].data) detail::check_finite(v, "weights");
    for (double v : p.biases[l]) detail::check_finite(v, "biases");
  }
  return p;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"lr0", c.lr0},
                        {"lr_decay", c.lr_decay},
                        {"max_epochs", c.max_epochs},
                        {"batch_size", c.batch_size},
                        {"patience", c.patience},
                        {"seed", c.seed},
                        {"penalty_lambda", c.penalty_lambda},
                        {"validation_fraction", c.validation_fraction}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.lr0 = detail::require_key(j, "lr0").get<double>();
    c.lr_decay = detail::require_key(j, "lr_decay").get<double>();
    c.max_epochs = detail::require_key(j, "max_epochs").get<int>();
    c.batch_size = detail::require_key(j, "batch_size").get<int>();
    c.patience = detail::require_key(j, "patience").get<int>();
    c.seed = detail::require_key(j, "seed").get<std::uint64_t>();
    c.penalty_lambda = detail::require_key(j, "penalty_lambda").get<double>();
    c.validation_fraction = detail::require_key(j, "validation_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::schema, std::string("bad train config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(DataErrorKind::schema, std::string("bad train config: ") + e.what());
  }
  return c;
}

inline nlohmann::json to_json(const Tricks& t) {
  return nlohmann::json{{"fixed_seed", t.fixed_seed},
                        {"penalty", t.penalty},
                        {"median_feature", t.median_feature}};
}

inline Tricks tricks_from_json(const nlohmann::json& j) {
  Tricks t;
  try {
    t.fixed_seed = detail::require_key(j, "fixed_seed").get<bool>();
    t.penalty = detail::require_key(j, "penalty").get<bool>();
    t.median_feature = detail::require_key(j, "median_feature").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::schema, std::string("bad tricks block: ") + e.what());
  }
  return t;
}

inline nlohmann::json to_json(const NormStats& s) {
  return nlohmann::json{{"feature_mean", s.feature_mean},
                        {"feature_std", s.feature_std},
                        {"target_mean", s.target_mean},
                        {"target_std", s.target_std}};
}

inline NormStats norm_stats_from_json(const nlohmann::json& j) {
  NormStats s;
  try {
    s.feature_mean = detail::require_key(j, "feature_mean").get<std::vector<double>>();
    s.feature_std = detail::require_key(j, "feature_std").get<std::vector<double>>();
    s.target_mean = detail::require_key(j, "target_mean").get<double>();
    s.target_std = detail::require_key(j, "target_std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::schema, std::string("bad normalisation stats: ") + e.what());
  }
  if (s.feature_mean.size() != s.feature_std.size())
    throw DataError(DataErrorKind::schema, "normalisation stats arrays differ in length");
  for (double v : s.feature_std)
    if (!(v > 0.0)) throw DataError(DataErrorKind::schema, "feature_std entries must be positive");
  if (!(s.target_std > 0.0))
    throw DataError(DataErrorKind::schema, "target_std must be positive");
  return s;
}

inline nlohmann::json to_json(const IntervalSpec& s) {
  return nlohmann::json{{"beta", s.beta},
                        {"alpha_lower", s.alpha_lower.value},
                        {"alpha_upper", s.alpha_upper.value}};
}

inline IntervalSpec interval_spec_from_json(const nlohmann::json& j) {
  try {
    const double beta = detail::require_key(j, "beta").get<double>();
    const double lo = detail::require_key(j, "alpha_lower").get<double>();
    const double hi = detail::require_key(j, "alpha_upper").get<double>();
    IntervalSpec spec(beta);
    if (std::abs(spec.alpha_lower.value - lo) > 1e-12 ||
        std::abs(spec.alpha_upper.value - hi) > 1e-12)
      throw DataError(DataErrorKind::schema,
                      "interval spec alphas are inconsistent with beta=" + format_double(beta));
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::schema, std::string("bad interval spec: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(DataErrorKind::schema, std::string("bad interval spec: ") + e.what());
  }
}

inline nlohmann::json to_json(const TrainedTriple& t) {
  return nlohmann::json{{"format_version", kFormatVersion},
                        {"spec", to_json(t.spec)},
                        {"median_as_feature", t.median_as_feature},
                        {"median", to_json(t.median)},
                        {"lower", to_json(t.lower)},
                        {"upper", to_json(t.upper)},
                        {"norm_stats", to_json(t.norm_stats)},
                        {"config", to_json(t.config)},
                        {"tricks", to_json(t.tricks)}};
}

inline TrainedTriple triple_from_json(const nlohmann::json& j) {
  detail::require_version(j);
  TrainedTriple t;
  t.spec = interval_spec_from_json(detail::require_key(j, "spec"));
  try {
    t.median_as_feature = detail::require_key(j, "median_as_feature").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::schema, std::string("bad triple: ") + e.what());
  }
  t.median = params_from_json(detail::require_key(j, "median"));
  t.lower = params_from_json(detail::require_key(j, "lower"));
  t.upper = params_from_json(detail::require_key(j, "upper"));
  t.norm_stats = norm_stats_from_json(detail::require_key(j, "norm_stats"));
  t.config = train_config_from_json(detail::require_key(j, "config"));
  t.tricks = tricks_from_json(detail::require_key(j, "tricks"));

  const int base_dim = int(t.norm_stats.feature_mean.size());
  const int bound_dim = base_dim + (t.median_as_feature ? 1 : 0);
  if (t.median.shape.input_dim != base_dim || t.lower.shape.input_dim != bound_dim ||
      t.upper.shape.input_dim != bound_dim)
    throw DataError(DataErrorKind::schema,
                    "triple network input dims do not match normalisation stats");
  return t;
}

inline void save_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::io, "cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw DataError(DataErrorKind::io, "write to '" + path + "' failed");
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::missing_file, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(DataErrorKind::schema, "'" + path + "': " + e.what());
  }
}

inline void save_params(const NetworkParams& p, const std::string& path) {
  save_json_file(to_json(p), path);
}

inline NetworkParams load_params(const std::string& path) {
  return params_from_json(load_json_file(path));
}

inline void save_triple(const TrainedTriple& t, const std::string& path) {
  save_json_file(to_json(t), path);
}

inline TrainedTriple load_triple(const std::string& path) {
  return triple_from_json(load_json_file(path));
}

}  // namespace qpi
