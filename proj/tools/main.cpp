// qpi: quantile prediction-interval toolkit.
//
// Subcommands: gen (synthetic data), train (one interval triple), backtest
// (walk-forward evaluation), eval (recompute reports from stored
// predictions), verify-theorem (pinball training recovers known quantiles).
//
// Exit codes: 0 success, 1 check failed, 2 usage/config error, 3 data error,
// 4 numeric divergence.
//
// Precedence for every setting: built-in default < --config JSON < flag.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qpi/qpi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- parsing

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

double parse_number(const std::string& cell, const std::string& flag) {
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    throw qpi::ConfigError(flag + ": '" + cell + "' is not a number");
  return v;
}

// "kind[:loc]:scale", e.g. "laplace:1" (loc 0, scale 1) or "gaussian:2:0.5".
qpi::DistributionSpec parse_dist(const std::string& text, const std::string& flag) {
  const auto parts = split(text, ':');
  qpi::DistKind kind;
  if (parts[0] == "laplace")
    kind = qpi::DistKind::laplace;
  else if (parts[0] == "gaussian")
    kind = qpi::DistKind::gaussian;
  else
    throw qpi::ConfigError(flag + ": unknown noise kind '" + parts[0] +
                           "' (expected laplace or gaussian)");
  double loc = 0.0, scale = 1.0;
  if (parts.size() == 2) {
    scale = parse_number(parts[1], flag);
  } else if (parts.size() == 3) {
    loc = parse_number(parts[1], flag);
    scale = parse_number(parts[2], flag);
  } else if (parts.size() > 3) {
    throw qpi::ConfigError(flag + ": expected kind[:loc]:scale, got '" + text + "'");
  }
  try {
    return qpi::DistributionSpec(kind, loc, scale);
  } catch (const qpi::ConfigError& e) {
    throw qpi::ConfigError(flag + ": " + e.what());
  }
}

// "16,8", "none" or "" -> hidden layer widths.
std::vector<int> parse_hidden(const std::string& text) {
  std::vector<int> widths;
  if (text.empty() || text == "none") return widths;
  for (const auto& tok : split(text, ',')) {
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      throw qpi::ConfigError("--hidden: '" + tok + "' is not an integer");
    widths.push_back(v);
  }
  return widths;
}

qpi::Tricks parse_tricks(const std::vector<std::string>& names) {
  qpi::Tricks t;
  for (const auto& name : names) {
    if (name == "fixed_seed")
      t.fixed_seed = true;
    else if (name == "penalty")
      t.penalty = true;
    else if (name == "median_feature")
      t.median_feature = true;
    else if (name == "all")
      t = qpi::Tricks{true, true, true};
    else if (name != "none")
      throw qpi::ConfigError(
          "--tricks: unknown trick '" + name +
          "' (expected fixed_seed, penalty, median_feature, all or none)");
  }
  return t;
}

void require_out(const std::string& out, const char* what) {
  if (out.empty()) throw qpi::ConfigError(std::string("--out is required for ") + what);
}

void ensure_parent_dir(const std::string& file_path) {
  const fs::path parent = fs::path(file_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// ---------------------------------------------------------------- options

struct SalesFlags {
  int days = 730;
  int period = 7;
  double base = 100.0;
  double amplitude = 20.0;
  double trend = 0.02;
  double noise_scale = 8.0;
  bool heteroscedastic = false;
  std::uint64_t seed = 1;
};

struct GenSalesCmd {
  SalesFlags sales;
  std::string out;
};

struct GenLinearCmd {
  std::size_t n = 10000;
  double y0 = 2.0;
  std::vector<double> w = {3.0};
  std::string noise = "laplace:1";
  std::uint64_t seed = 1;
  std::string out;
};

struct SourceFlags {
  std::string data;        // CSV path
  bool gen_sales = false;  // or generate inline with the SalesFlags below
  SalesFlags sales;
};

struct TrainingFlags {
  int window = 14;
  int horizon = 1;
  std::string hidden = "16";
  std::string activation = "relu";
  double lr0 = 1e-3;
  double lr_decay = 0.97;
  int epochs = 100;
  int batch_size = 64;
  int patience = 10;
  std::uint64_t seed = 0;
  double penalty_lambda = 10.0;
  double validation_fraction = 0.15;
  std::vector<std::string> tricks;
};

struct TrainCmd {
  SourceFlags source;
  TrainingFlags training;
  double beta = 0.8;
  std::string out;
};

struct BacktestCmd {
  SourceFlags source;
  TrainingFlags training;
  std::vector<double> betas = {0.8};
  int train_days = 730;
  int retrain_every = 1;
  std::string out;
};

struct EvalCmd {
  std::string plotdata;
  std::string format = "json";
  std::uint64_t seed = 0;
  std::string out;
};

struct VerifyCmd {
  std::string dist = "laplace:0:1";
  std::vector<double> alphas = {0.05, 0.25, 0.5, 0.75, 0.95};
  std::size_t n = 20000;
  std::uint64_t seed = 1;
  double tolerance = 0.08;
};

qpi::TrainConfig to_train_config(const TrainingFlags& t) {
  qpi::TrainConfig cfg;
  cfg.lr0 = t.lr0;
  cfg.lr_decay = t.lr_decay;
  cfg.max_epochs = t.epochs;
  cfg.batch_size = t.batch_size;
  cfg.patience = t.patience;
  cfg.seed = t.seed;
  cfg.penalty_lambda = t.penalty_lambda;
  cfg.validation_fraction = t.validation_fraction;
  cfg.validate();
  return cfg;
}

// ------------------------------------------------------------ config file

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qpi::DataError(qpi::DataErrorKind::missing_file,
                                "cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw qpi::DataError(qpi::DataErrorKind::schema, "config '" + path + "': " + e.what());
  }
}

std::string hidden_from_json(const json& v) {
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!out.empty()) out += ',';
      out += std::to_string(e.get<int>());
    }
    return out.empty() ? "none" : out;
  }
  return v.get<std::string>();
}

bool apply_sales_key(const json& v, const std::string& key, SalesFlags& s,
                     const std::string& seed_key) {
  if (key == "days") s.days = v.get<int>();
  else if (key == "period") s.period = v.get<int>();
  else if (key == "base") s.base = v.get<double>();
  else if (key == "amplitude") s.amplitude = v.get<double>();
  else if (key == "trend") s.trend = v.get<double>();
  else if (key == "noise_scale") s.noise_scale = v.get<double>();
  else if (key == "heteroscedastic") s.heteroscedastic = v.get<bool>();
  else if (key == seed_key) s.seed = v.get<std::uint64_t>();
  else return false;
  return true;
}

bool apply_source_key(const json& v, const std::string& key, SourceFlags& s) {
  if (key == "data") s.data = v.get<std::string>();
  else if (key == "gen_sales") s.gen_sales = v.get<bool>();
  else return apply_sales_key(v, key, s.sales, "gen_seed");
  return true;
}

bool apply_training_key(const json& v, const std::string& key, TrainingFlags& t) {
  if (key == "window") t.window = v.get<int>();
  else if (key == "horizon") t.horizon = v.get<int>();
  else if (key == "hidden") t.hidden = hidden_from_json(v);
  else if (key == "activation") t.activation = v.get<std::string>();
  else if (key == "lr0") t.lr0 = v.get<double>();
  else if (key == "lr_decay") t.lr_decay = v.get<double>();
  else if (key == "epochs") t.epochs = v.get<int>();
  else if (key == "batch_size") t.batch_size = v.get<int>();
  else if (key == "patience") t.patience = v.get<int>();
  else if (key == "seed") t.seed = v.get<std::uint64_t>();
  else if (key == "penalty_lambda") t.penalty_lambda = v.get<double>();
  else if (key == "validation_fraction") t.validation_fraction = v.get<double>();
  else if (key == "tricks") t.tricks = v.get<std::vector<std::string>>();
  else return false;
  return true;
}

template <typename Fn>
void apply_config(const json& cfg, const char* command, Fn&& per_key) {
  if (!cfg.is_object()) throw qpi::ConfigError("config: top level must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    bool known = false;
    try {
      known = per_key(key, value);
    } catch (const json::exception& e) {
      throw qpi::ConfigError("config: bad value for '" + key + "': " + e.what());
    }
    if (!known)
      throw qpi::ConfigError("config: unknown key '" + key + "' for '" + std::string(command) +
                             "'");
  }
}

// ------------------------------------------------------------ subcommands

int run_gen_sales(const GenSalesCmd& c) {
  require_out(c.out, "gen sales");
  const auto frame =
      qpi::gen_sales_series(c.sales.days, c.sales.period, c.sales.base, c.sales.amplitude,
                            c.sales.trend, c.sales.noise_scale, c.sales.heteroscedastic,
                            c.sales.seed);
  ensure_parent_dir(c.out);
  qpi::save_csv(frame, c.out);
  std::cout << "wrote " << c.out << " (" << frame.size() << " rows, "
            << frame.exo_names.size() << " exogenous columns)\n";
  return 0;
}

int run_gen_linear(const GenLinearCmd& c) {
  require_out(c.out, "gen linear");
  if (c.w.empty()) throw qpi::ConfigError("--w: at least one weight is required");
  const auto noise = parse_dist(c.noise, "--noise");
  const auto ds = qpi::gen_linear(c.n, c.y0, c.w, noise, c.seed);

  // Persist through the shared frame schema: t = row index, y = target,
  // features as exogenous columns.
  qpi::SeriesFrame frame;
  frame.exo_names = ds.feature_names;
  frame.exo.assign(frame.exo_names.size(), {});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    frame.timestamps.push_back(long(i));
    frame.values.push_back(ds.samples[i].target);
    for (std::size_t j = 0; j < frame.exo.size(); ++j)
      frame.exo[j].push_back(ds.samples[i].features[j]);
  }
  ensure_parent_dir(c.out);
  qpi::save_csv(frame, c.out);
  std::cout << "wrote " << c.out << " (" << frame.size() << " rows)\n";
  return 0;
}

qpi::SeriesFrame resolve_source(const SourceFlags& s) {
  const bool have_csv = !s.data.empty();
  if (have_csv == s.gen_sales)
    throw qpi::ConfigError("exactly one data source is required: --data PATH or --gen-sales");
  if (have_csv) return qpi::load_csv(s.data);
  return qpi::gen_sales_series(s.sales.days, s.sales.period, s.sales.base, s.sales.amplitude,
                               s.sales.trend, s.sales.noise_scale, s.sales.heteroscedastic,
                               s.sales.seed);
}

json source_echo(const SourceFlags& s) {
  if (!s.data.empty()) return json{{"data", s.data}};
  return json{{"gen_sales", true},
              {"days", s.sales.days},
              {"period", s.sales.period},
              {"base", s.sales.base},
              {"amplitude", s.sales.amplitude},
              {"trend", s.sales.trend},
              {"noise_scale", s.sales.noise_scale},
              {"heteroscedastic", s.sales.heteroscedastic},
              {"gen_seed", s.sales.seed}};
}

json training_echo(const TrainingFlags& t) {
  return json{{"window", t.window},
              {"horizon", t.horizon},
              {"hidden", t.hidden},
              {"activation", t.activation},
              {"lr0", t.lr0},
              {"lr_decay", t.lr_decay},
              {"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"patience", t.patience},
              {"seed", t.seed},
              {"penalty_lambda", t.penalty_lambda},
              {"validation_fraction", t.validation_fraction},
              {"tricks", t.tricks}};
}

std::string config_hash(const json& echo) { return qpi::to_hex(qpi::fnv1a64(echo.dump())); }

int run_train(const TrainCmd& c) {
  require_out(c.out, "train");
  const auto frame = resolve_source(c.source);
  const auto ds = qpi::make_windows(frame, c.training.window, c.training.horizon);

  qpi::NetworkShape shape;
  shape.input_dim = ds.feature_dim;
  shape.hidden_layers = parse_hidden(c.training.hidden);
  shape.activation = qpi::activation_from_string(c.training.activation);

  const auto cfg = to_train_config(c.training);
  const auto tricks = parse_tricks(c.training.tricks);
  const auto triple =
      qpi::train_triple(ds, shape, qpi::IntervalSpec(c.beta), cfg, tricks);

  fs::create_directories(c.out);
  const std::string path = (fs::path(c.out) / "triple.json").string();
  qpi::save_triple(triple, path);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_backtest(const BacktestCmd& c) {
  require_out(c.out, "backtest");
  if (c.betas.empty()) throw qpi::ConfigError("--betas: at least one interval width required");
  const auto frame = resolve_source(c.source);

  std::vector<qpi::IntervalSpec> specs;
  specs.reserve(c.betas.size());
  for (double b : c.betas) specs.emplace_back(b);

  qpi::NetworkShape shape;
  shape.input_dim = c.training.window + int(frame.exo.size());
  shape.hidden_layers = parse_hidden(c.training.hidden);
  shape.activation = qpi::activation_from_string(c.training.activation);

  const auto cfg = to_train_config(c.training);
  const auto tricks = parse_tricks(c.training.tricks);
  const auto results =
      qpi::rolling_backtest(frame, c.training.window, c.training.horizon, specs, shape, cfg,
                            tricks, c.train_days, c.retrain_every);

  json echo = training_echo(c.training);
  echo["source"] = source_echo(c.source);
  echo["betas"] = c.betas;
  echo["train_days"] = c.train_days;
  echo["retrain_every"] = c.retrain_every;
  const qpi::ReportMeta meta{c.training.seed, config_hash(echo)};

  fs::create_directories(c.out);
  const std::string plot_path = (fs::path(c.out) / "plotdata.csv").string();
  qpi::emit_plot_data(results, plot_path);
  std::cout << "wrote " << plot_path << " (" << results.front().points.size() << " points)\n";

  for (const auto& series : results) {
    const auto report = qpi::coverage(series.points);
    const std::string path =
        (fs::path(c.out) / ("coverage_" + qpi::format_double(series.spec.beta) + ".json"))
            .string();
    qpi::emit_report(report, meta, path, qpi::ReportFormat::json);
    std::cout << "beta=" << qpi::format_double(series.spec.beta)
              << " coverage=" << qpi::format_double(report.success_rate)
              << " mean_width=" << qpi::format_double(report.mean_width)
              << " rogue=" << qpi::format_double(report.rogue_rate)
              << " crossings=" << report.crossing_count << " n=" << report.n << "\n";
  }
  std::cout << "nesting_violations=" << qpi::nesting_violations(results) << "\n";
  return 0;
}

int run_eval(const EvalCmd& c) {
  require_out(c.out, "eval");
  if (c.plotdata.empty()) throw qpi::ConfigError("--plotdata is required for eval");
  qpi::ReportFormat format;
  if (c.format == "json")
    format = qpi::ReportFormat::json;
  else if (c.format == "csv")
    format = qpi::ReportFormat::csv;
  else
    throw qpi::ConfigError("--format: expected json or csv, got '" + c.format + "'");

  const auto series_list = qpi::load_plot_data(c.plotdata);
  const json echo{{"plotdata", c.plotdata}, {"format", c.format}, {"seed", c.seed}};
  const qpi::ReportMeta meta{c.seed, config_hash(echo)};

  fs::create_directories(c.out);
  const char* ext = format == qpi::ReportFormat::json ? ".json" : ".csv";
  for (const auto& series : series_list) {
    const auto report = qpi::coverage(series.points);
    const std::string path =
        (fs::path(c.out) / ("coverage_" + qpi::format_double(series.spec.beta) + ext)).string();
    qpi::emit_report(report, meta, path, format);
    std::cout << "beta=" << qpi::format_double(series.spec.beta)
              << " coverage=" << qpi::format_double(report.success_rate) << " n=" << report.n
              << " -> " << path << "\n";
  }
  std::cout << "nesting_violations=" << qpi::nesting_violations(series_list) << "\n";
  return 0;
}

int run_verify(const VerifyCmd& c) {
  if (c.alphas.empty()) throw qpi::ConfigError("--alphas: at least one level required");
  if (!(c.tolerance > 0.0)) throw qpi::ConfigError("--tolerance must be positive");
  const auto dist = parse_dist(c.dist, "--dist");
  const auto targets = qpi::sample(dist, c.n, c.seed);

  qpi::Dataset ds;
  ds.feature_dim = 1;
  ds.feature_names = {"bias"};
  ds.samples.reserve(targets.size());
  for (double y : targets) ds.samples.push_back(qpi::Sample{{0.0}, y});

  qpi::NetworkShape shape;  // no hidden layers: the model is just its bias
  shape.input_dim = 1;

  qpi::TrainConfig cfg;
  cfg.lr_decay = 0.95;
  cfg.max_epochs = 120;
  cfg.patience = 15;
  cfg.seed = c.seed;

  bool all_pass = true;
  const std::vector<double> probe{0.0};
  for (double a : c.alphas) {
    const qpi::QuantileLevel level(a);  // validates the level itself
    const auto params = qpi::train_quantile(ds, shape, level, cfg);
    const double learned = qpi::forward(params, probe);
    const double analytic = qpi::analytic_quantile(dist, level);
    const double empirical = qpi::empirical_quantile(targets, level);
    const double err = std::abs(learned - analytic);
    const bool pass = err <= c.tolerance;
    all_pass = all_pass && pass;
    std::cout << "alpha=" << qpi::format_double(a) << " learned=" << qpi::format_double(learned)
              << " analytic=" << qpi::format_double(analytic)
              << " empirical=" << qpi::format_double(empirical)
              << " abs_err=" << qpi::format_double(err) << (pass ? " PASS" : " FAIL") << "\n";
  }
  if (!all_pass) std::cout << "verify-theorem: tolerance " << qpi::format_double(c.tolerance)
                           << " exceeded\n";
  return all_pass ? 0 : 1;
}

// Pre-CLI scan: find the subcommand path and any --config value so the file
// can seed the option structs before flags are parsed on top.
struct ArgScan {
  std::string command;  // "gen", "train", ...
  std::string subcommand;  // for gen: "sales" | "linear"
  std::string config_path;
};

ArgScan scan_args(int argc, char** argv) {
  ArgScan scan;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config") {
      if (i + 1 < argc) scan.config_path = argv[i + 1];
      ++i;
    } else if (arg.rfind("--config=", 0) == 0) {
      scan.config_path = arg.substr(9);
    } else if (arg.rfind("--", 0) == 0) {
      continue;  // other flags (and possibly their values) are CLI11's job
    } else if (scan.command.empty()) {
      scan.command = arg;
    } else if (scan.subcommand.empty()) {
      scan.subcommand = arg;
    }
  }
  return scan;
}

}  // namespace

int main(int argc, char** argv) {
  GenSalesCmd gen_sales;
  GenLinearCmd gen_linear;
  TrainCmd train;
  BacktestCmd backtest;
  EvalCmd eval;
  VerifyCmd verify;
  std::string config_path;  // registered everywhere, consumed before parsing

  try {
    const ArgScan scan = scan_args(argc, argv);
    if (!scan.config_path.empty()) {
      const json cfg = load_config_file(scan.config_path);
      if (scan.command == "gen" && scan.subcommand == "sales") {
        apply_config(cfg, "gen sales", [&](const std::string& k, const json& v) {
          if (k == "out") { gen_sales.out = v.get<std::string>(); return true; }
          return apply_sales_key(v, k, gen_sales.sales, "seed");
        });
      } else if (scan.command == "gen" && scan.subcommand == "linear") {
        apply_config(cfg, "gen linear", [&](const std::string& k, const json& v) {
          if (k == "n") gen_linear.n = v.get<std::size_t>();
          else if (k == "y0") gen_linear.y0 = v.get<double>();
          else if (k == "w") gen_linear.w = v.get<std::vector<double>>();
          else if (k == "noise") gen_linear.noise = v.get<std::string>();
          else if (k == "seed") gen_linear.seed = v.get<std::uint64_t>();
          else if (k == "out") gen_linear.out = v.get<std::string>();
          else return false;
          return true;
        });
      } else if (scan.command == "train") {
        apply_config(cfg, "train", [&](const std::string& k, const json& v) {
          if (k == "beta") train.beta = v.get<double>();
          else if (k == "out") train.out = v.get<std::string>();
          else return apply_training_key(v, k, train.training) ||
                      apply_source_key(v, k, train.source);
          return true;
        });
      } else if (scan.command == "backtest") {
        apply_config(cfg, "backtest", [&](const std::string& k, const json& v) {
          if (k == "betas") backtest.betas = v.get<std::vector<double>>();
          else if (k == "train_days") backtest.train_days = v.get<int>();
          else if (k == "retrain_every") backtest.retrain_every = v.get<int>();
          else if (k == "out") backtest.out = v.get<std::string>();
          else return apply_training_key(v, k, backtest.training) ||
                      apply_source_key(v, k, backtest.source);
          return true;
        });
      } else if (scan.command == "eval") {
        apply_config(cfg, "eval", [&](const std::string& k, const json& v) {
          if (k == "plotdata") eval.plotdata = v.get<std::string>();
          else if (k == "format") eval.format = v.get<std::string>();
          else if (k == "seed") eval.seed = v.get<std::uint64_t>();
          else if (k == "out") eval.out = v.get<std::string>();
          else return false;
          return true;
        });
      } else if (scan.command == "verify-theorem") {
        apply_config(cfg, "verify-theorem", [&](const std::string& k, const json& v) {
          if (k == "dist") verify.dist = v.get<std::string>();
          else if (k == "alphas") verify.alphas = v.get<std::vector<double>>();
          else if (k == "n") verify.n = v.get<std::size_t>();
          else if (k == "seed") verify.seed = v.get<std::uint64_t>();
          else if (k == "tolerance") verify.tolerance = v.get<double>();
          else return false;
          return true;
        });
      }
    }
  } catch (const qpi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qpi::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  }

  CLI::App app{"quantile prediction intervals for tabular time series"};
  app.require_subcommand(1);

  auto add_config_flag = [&config_path](CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "JSON file with defaults for this subcommand (flags win)");
  };
  auto add_sales_flags = [](CLI::App* cmd, SalesFlags& s, const char* seed_name) {
    cmd->add_option("--days", s.days, "series length in days")->capture_default_str();
    cmd->add_option("--period", s.period, "seasonality period")->capture_default_str();
    cmd->add_option("--base", s.base, "base demand level")->capture_default_str();
    cmd->add_option("--amplitude", s.amplitude, "seasonal amplitude")->capture_default_str();
    cmd->add_option("--trend", s.trend, "linear trend per day")->capture_default_str();
    cmd->add_option("--noise-scale", s.noise_scale, "Laplace noise scale")
        ->capture_default_str();
    cmd->add_flag("--heteroscedastic,!--no-heteroscedastic", s.heteroscedastic,
                  "noise scale grows with the level");
    cmd->add_option(seed_name, s.seed, "generator seed")->capture_default_str();
  };
  auto add_training_flags = [](CLI::App* cmd, TrainingFlags& t) {
    cmd->add_option("--window", t.window, "lagged values per sample")->capture_default_str();
    cmd->add_option("--horizon", t.horizon, "rows between window end and target")
        ->capture_default_str();
    cmd->add_option("--hidden", t.hidden, "hidden widths, e.g. 16,8 (or none)")
        ->capture_default_str();
    cmd->add_option("--activation", t.activation, "relu or tanh")->capture_default_str();
    cmd->add_option("--lr0", t.lr0, "initial learning rate")->capture_default_str();
    cmd->add_option("--lr-decay", t.lr_decay, "per-epoch learning rate factor")
        ->capture_default_str();
    cmd->add_option("--epochs", t.epochs, "max training epochs")->capture_default_str();
    cmd->add_option("--batch-size", t.batch_size, "mini-batch size")->capture_default_str();
    cmd->add_option("--patience", t.patience, "early-stopping patience in epochs")
        ->capture_default_str();
    cmd->add_option("--seed", t.seed, "training seed")->capture_default_str();
    cmd->add_option("--penalty-lambda", t.penalty_lambda, "ordering hinge weight")
        ->capture_default_str();
    cmd->add_option("--validation-fraction", t.validation_fraction,
                    "chronological tail held out for early stopping")
        ->capture_default_str();
    cmd->add_option("--tricks", t.tricks,
                    "stabilisers: fixed_seed, penalty, median_feature, all, none")
        ->delimiter(',');
  };
  auto add_source_flags = [&add_sales_flags](CLI::App* cmd, SourceFlags& s) {
    cmd->add_option("--data", s.data, "input series CSV (t,y[,exo...])");
    cmd->add_flag("--gen-sales,!--no-gen-sales", s.gen_sales,
                  "generate the input series instead of reading --data");
    add_sales_flags(cmd, s.sales, "--gen-seed");
  };

  auto* gen = app.add_subcommand("gen", "generate synthetic datasets");
  gen->require_subcommand(1);
  auto* sales = gen->add_subcommand("sales", "seasonal demand series CSV");
  add_sales_flags(sales, gen_sales.sales, "--seed");
  sales->add_option("--out", gen_sales.out, "output CSV path");
  add_config_flag(sales);

  auto* linear = gen->add_subcommand("linear", "linear regression dataset CSV");
  linear->add_option("--n", gen_linear.n, "sample count")->capture_default_str();
  linear->add_option("--y0", gen_linear.y0, "intercept")->capture_default_str();
  linear->add_option("--w", gen_linear.w, "true weights, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  linear->add_option("--noise", gen_linear.noise, "noise spec kind[:loc]:scale")
      ->capture_default_str();
  linear->add_option("--seed", gen_linear.seed, "generator seed")->capture_default_str();
  linear->add_option("--out", gen_linear.out, "output CSV path");
  add_config_flag(linear);

  auto* train_cmd = app.add_subcommand("train", "fit one interval triple, write triple.json");
  add_source_flags(train_cmd, train.source);
  add_training_flags(train_cmd, train.training);
  train_cmd->add_option("--beta", train.beta, "nominal interval width in (0,1)")
      ->capture_default_str();
  train_cmd->add_option("--out", train.out, "output directory");
  add_config_flag(train_cmd);

  auto* backtest_cmd =
      app.add_subcommand("backtest", "walk-forward evaluation, write plotdata + coverage");
  add_source_flags(backtest_cmd, backtest.source);
  add_training_flags(backtest_cmd, backtest.training);
  backtest_cmd->add_option("--betas", backtest.betas, "interval widths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  backtest_cmd->add_option("--train-days", backtest.train_days,
                           "rows before the first forecast cutoff")
      ->capture_default_str();
  backtest_cmd
      ->add_option("--retrain-every", backtest.retrain_every,
                   "steps between retrains (1 = every step)")
      ->capture_default_str();
  backtest_cmd->add_option("--out", backtest.out, "output directory");
  add_config_flag(backtest_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "recompute coverage reports from plotdata.csv");
  eval_cmd->add_option("--plotdata", eval.plotdata, "plotdata.csv from a backtest");
  eval_cmd->add_option("--format", eval.format, "report format: json or csv")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "seed recorded in report meta")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "output directory");
  add_config_flag(eval_cmd);

  auto* verify_cmd = app.add_subcommand(
      "verify-theorem", "check pinball training recovers known analytic quantiles");
  verify_cmd->add_option("--dist", verify.dist, "target distribution kind[:loc]:scale")
      ->capture_default_str();
  verify_cmd->add_option("--alphas", verify.alphas, "quantile levels, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  verify_cmd->add_option("--n", verify.n, "sample count")->capture_default_str();
  verify_cmd->add_option("--seed", verify.seed, "sampling/training seed")
      ->capture_default_str();
  verify_cmd->add_option("--tolerance", verify.tolerance, "max |learned - analytic|")
      ->capture_default_str();
  add_config_flag(verify_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(gen)) {
      if (gen->got_subcommand(sales)) return run_gen_sales(gen_sales);
      return run_gen_linear(gen_linear);
    }
    if (app.got_subcommand(train_cmd)) return run_train(train);
    if (app.got_subcommand(backtest_cmd)) return run_backtest(backtest);
    if (app.got_subcommand(eval_cmd)) return run_eval(eval);
    if (app.got_subcommand(verify_cmd)) return run_verify(verify);
  } catch (const qpi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qpi::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const qpi::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
