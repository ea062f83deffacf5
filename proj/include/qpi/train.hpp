#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qpi/common.hpp"
#include "qpi/data.hpp"
#include "qpi/loss.hpp"
#include "qpi/net.hpp"

// Quantile model training and the three-model prediction interval: a median
// model plus one network per interval endpoint, each fit with the pinball
// loss at its own level. Three optional stabilisers ("tricks"):
//   fixed_seed     - all three models share the seed, so they start from the
//                    same weights and see the same mini-batch schedule;
//   penalty        - endpoint models pay a hinge penalty whenever they cross
//                    the (frozen) median model's prediction;
//   median_feature - endpoint models receive the median model's prediction
//                    as an extra input feature.

namespace qpi {

struct TrainConfig {
  double lr0 = 1e-3;
  double lr_decay = 0.97;  // multiplicative, per epoch
  int max_epochs = 100;
  int batch_size = 64;
  int patience = 10;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
  double penalty_lambda = 10.0;
  double validation_fraction = 0.15;  // tail of the dataset, time order

  void validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(penalty_lambda >= 0.0)) throw ConfigError("penalty_lambda must be nonnegative");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("validation_fraction must lie in (0, 1)");
  }
};

namespace detail {
inline double checked_interval_width(double w) {
  if (!(w > 0.0 && w < 1.0))
    throw ConfigError("interval width must lie in (0, 1), got " + format_double(w));
  return w;
}
}  // namespace detail

// Central beta-interval: endpoints at the 0.5 -+ beta/2 quantiles.
struct IntervalSpec {
  double beta = 0.5;
  QuantileLevel alpha_lower{0.25};
  QuantileLevel alpha_upper{0.75};

  IntervalSpec() = default;
  explicit IntervalSpec(double width)
      : beta(detail::checked_interval_width(width)),
        alpha_lower(0.5 - width / 2.0),
        alpha_upper(0.5 + width / 2.0) {}
};

struct Tricks {
  bool fixed_seed = false;
  bool penalty = false;
  bool median_feature = false;
};

struct TrainedTriple {
  NetworkParams median;
  NetworkParams lower;
  NetworkParams upper;
  IntervalSpec spec;
  bool median_as_feature = false;
  NormStats norm_stats;
  TrainConfig config;
  Tricks tricks;
};

struct PredictionInterval {
  double lower = 0.0;
  double median = 0.0;
  double upper = 0.0;
  IntervalSpec spec;
};

// Optional per-run diagnostics for callers that want to inspect convergence.
struct TrainLog {
  std::vector<double> val_losses;  // one entry per completed epoch
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int epochs_run = 0;
};

// Fits one network to the alpha-quantile of the dataset's targets by
// mini-batch Adam on the mean pinball loss (plus the ordering hinge when a
// reference is supplied). Batches are drawn with replacement from the
// chronological head of the data; the tail (validation_fraction) is held out
// and scored after every epoch. Returns the parameters of the best
// validation epoch. Fully deterministic for a fixed (dataset, config).
inline NetworkParams train_quantile(const Dataset& ds, const NetworkShape& shape,
                                    QuantileLevel alpha, const TrainConfig& cfg,
                                    const std::vector<double>* reference = nullptr,
                                    std::optional<OrderingSide> side = std::nullopt,
                                    TrainLog* log = nullptr) {
  cfg.validate();
  shape.validate();
  if (ds.samples.empty()) throw ConfigError("train_quantile: empty dataset");
  if (shape.input_dim != ds.feature_dim)
    throw ConfigError("train_quantile: shape input_dim " + std::to_string(shape.input_dim) +
                      " does not match dataset feature_dim " + std::to_string(ds.feature_dim));
  if (reference) {
    if (reference->size() != ds.size())
      throw ConfigError("train_quantile: reference predictions must cover every sample");
    if (!side) throw ConfigError("train_quantile: reference given without an ordering side");
  }

  const double lambda = reference ? cfg.penalty_lambda : 0.0;
  const OrderingSide pside = side.value_or(OrderingSide::upper_bound);
  const std::size_t n = ds.size();
  std::size_t n_val = std::size_t(double(n) * cfg.validation_fraction);
  std::size_t n_train = n - n_val;
  // Tiny datasets: train and validate on everything rather than starving one side.
  if (n_val == 0 || n_train == 0) n_train = n;
  const std::size_t val_begin = (n_train == n) ? 0 : n_train;

  auto sample_loss = [&](const NetworkParams& p, std::size_t i, double pred) {
    const Sample& s = ds.samples[i];
    (void)p;
    return reference ? bound_loss(s.target, pred, alpha, (*reference)[i], pside, lambda)
                     : pinball(s.target, pred, alpha);
  };
  auto validation_loss = [&](const NetworkParams& p) {
    double total = 0.0;
    for (std::size_t i = val_begin; i < n; ++i)
      total += sample_loss(p, i, forward(p, ds.samples[i].features));
    return total / double(n - val_begin);
  };

  NetworkParams params = init_params(shape, cfg.seed);
  AdamState adam = init_adam(params);
  auto batch_eng = rng::make_engine(cfg.seed, rng::stream_minibatch);
  const int steps_per_epoch =
      int((n_train + std::size_t(cfg.batch_size) - 1) / std::size_t(cfg.batch_size));

  NetworkParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int stall = 0;
  int epochs_run = 0;

  ForwardTrace tr;
  Gradient batch_grad = zero_gradient(params);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr0 * std::pow(cfg.lr_decay, double(epoch));
    for (int step = 0; step < steps_per_epoch; ++step) {
      batch_grad.set_zero();
      double batch_loss = 0.0;
      for (int b = 0; b < cfg.batch_size; ++b) {
        std::size_t i = std::size_t(rng::uniform01(batch_eng) * double(n_train));
        if (i >= n_train) i = n_train - 1;
        const double pred = forward_trace(params, ds.samples[i].features, tr);
        batch_loss += sample_loss(params, i, pred);
        const double up =
            (reference ? bound_loss_grad(ds.samples[i].target, pred, alpha, (*reference)[i],
                                         pside, lambda)
                       : pinball_grad(ds.samples[i].target, pred, alpha)) /
            double(cfg.batch_size);
        backward_accumulate(params, tr, up, batch_grad);
      }
      if (!std::isfinite(batch_loss))
        throw DivergenceError(
            "training diverged: non-finite batch loss in epoch " + std::to_string(epoch), epoch);
      std::tie(params, adam) = adam_step(params, adam, batch_grad, lr);
    }

    const double val = validation_loss(params);
    if (!std::isfinite(val))
      throw DivergenceError(
          "training diverged: non-finite validation loss in epoch " + std::to_string(epoch),
          epoch);
    if (log) log->val_losses.push_back(val);
    epochs_run = epoch + 1;
    if (val < best_val) {
      best_val = val;
      best = params;
      best_epoch = epoch;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      break;
    }
  }

  if (log) {
    log->best_val_loss = best_val;
    log->best_epoch = best_epoch;
    log->epochs_run = epochs_run;
  }
  return best;
}

namespace detail {

struct MedianArtifacts {
  NetworkParams params;
  std::vector<double> preds;  // over the (normalised) training dataset
};

inline TrainConfig with_seed(const TrainConfig& cfg, std::uint64_t seed) {
  TrainConfig c = cfg;
  c.seed = seed;
  return c;
}

inline MedianArtifacts train_median_model(const Dataset& nds, const NetworkShape& shape,
                                          const TrainConfig& cfg, bool want_preds) {
  MedianArtifacts m;
  m.params = train_quantile(nds, shape, QuantileLevel(0.5), cfg);
  if (want_preds) {
    m.preds.reserve(nds.size());
    for (const auto& s : nds.samples) m.preds.push_back(forward(m.params, s.features));
  }
  return m;
}

// Endpoint models reuse the shared seed when fixed_seed is on, otherwise
// seed + 1 (lower) and seed + 2 (upper). The median's predictions are frozen
// before endpoint training, so the hinge reference never moves underneath.
inline NetworkParams train_bound_model(const Dataset& nds, const NetworkShape& shape,
                                       QuantileLevel alpha, OrderingSide bound_side,
                                       const TrainConfig& cfg, const Tricks& tricks,
                                       const MedianArtifacts& median, int model_index) {
  const std::uint64_t seed =
      tricks.fixed_seed ? cfg.seed : cfg.seed + std::uint64_t(model_index);
  const Dataset* input = &nds;
  Dataset augmented;
  NetworkShape bound_shape = shape;
  if (tricks.median_feature) {
    augmented = nds;
    augmented.feature_dim += 1;
    augmented.feature_names.push_back("median_pred");
    for (std::size_t i = 0; i < augmented.samples.size(); ++i)
      augmented.samples[i].features.push_back(median.preds[i]);
    bound_shape.input_dim += 1;
    input = &augmented;
  }
  const std::vector<double>* ref = tricks.penalty ? &median.preds : nullptr;
  return train_quantile(*input, bound_shape, alpha, with_seed(cfg, seed), ref,
                        tricks.penalty ? std::optional<OrderingSide>(bound_side) : std::nullopt);
}

}  // namespace detail

// Trains one median model and a (lower, upper) pair per requested interval.
// The median is shared across all intervals, which keeps a multi-width
// backtest affordable and bit-identical to training each width separately.
inline std::vector<TrainedTriple> train_triples(const Dataset& ds, const NetworkShape& shape,
                                                const std::vector<IntervalSpec>& specs,
                                                const TrainConfig& cfg, const Tricks& tricks) {
  if (specs.empty()) throw ConfigError("train_triples: need at least one interval spec");
  cfg.validate();
  shape.validate();
  auto [nds, stats] = normalize(ds);
  const bool want_preds = tricks.penalty || tricks.median_feature;
  const auto median = detail::train_median_model(nds, shape, cfg, want_preds);

  std::vector<TrainedTriple> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    TrainedTriple t;
    t.median = median.params;
    t.lower = detail::train_bound_model(nds, shape, spec.alpha_lower, OrderingSide::lower_bound,
                                        cfg, tricks, median, 1);
    t.upper = detail::train_bound_model(nds, shape, spec.alpha_upper, OrderingSide::upper_bound,
                                        cfg, tricks, median, 2);
    t.spec = spec;
    t.median_as_feature = tricks.median_feature;
    t.norm_stats = stats;
    t.config = cfg;
    t.tricks = tricks;
    out.push_back(std::move(t));
  }
  return out;
}

inline TrainedTriple train_triple(const Dataset& ds, const NetworkShape& shape,
                                  const IntervalSpec& spec, const TrainConfig& cfg,
                                  const Tricks& tricks) {
  auto v = train_triples(ds, shape, {spec}, cfg, tricks);
  return std::move(v.front());
}

// Raw-unit prediction: features are standardised with the stored stats, the
// three networks are evaluated, and the outputs mapped back. The median
// model runs first so its prediction can feed the endpoint models.
inline PredictionInterval predict_interval(const TrainedTriple& t, std::span<const double> x) {
  const auto xn = normalize_features(x, t.norm_stats);
  const double med_n = forward(t.median, xn);
  std::vector<double> xb = xn;
  if (t.median_as_feature) xb.push_back(med_n);
  const double low_n = forward(t.lower, xb);
  const double up_n = forward(t.upper, xb);
  PredictionInterval pi;
  pi.lower = denormalize_prediction(low_n, t.norm_stats);
  pi.median = denormalize_prediction(med_n, t.norm_stats);
  pi.upper = denormalize_prediction(up_n, t.norm_stats);
  pi.spec = t.spec;
  return pi;
}

struct BacktestPoint {
  long long timestamp = 0;
  PredictionInterval interval;
  double actual = 0.0;
};

struct BacktestSeries {
  IntervalSpec spec;
  std::vector<BacktestPoint> points;
};

// Walk-forward evaluation. The cutoff starts after `train_days` rows and
// advances by `horizon` per step; models only ever see windows whose target
// lies strictly before the cutoff, so no feature or target leaks from the
// evaluation block. Retraining happens every `retrain_every` steps (1 =
// every step); between retrains the most recent triple is reused.
// `first_triples`, when given, receives the triples fitted at the first
// cutoff - handy for inspecting exactly what the earliest step saw.
inline std::vector<BacktestSeries> rolling_backtest(
    const SeriesFrame& series, int window, int horizon, const std::vector<IntervalSpec>& specs,
    const NetworkShape& shape, const TrainConfig& cfg, const Tricks& tricks, int train_days,
    int retrain_every = 1, std::vector<TrainedTriple>* first_triples = nullptr) {
  series.validate();
  if (specs.empty()) throw ConfigError("rolling_backtest: need at least one interval spec");
  if (retrain_every < 1) throw ConfigError("rolling_backtest: retrain_every must be >= 1");
  if (window < 1 || horizon < 1)
    throw ConfigError("rolling_backtest: window and horizon must be >= 1");
  const long n = long(series.size());
  if (long(train_days) < long(window) + long(horizon))
    throw DataError(DataErrorKind::insufficient_data,
                    "rolling_backtest: train_days must be >= window + horizon");
  if (long(train_days) >= n)
    throw DataError(DataErrorKind::insufficient_data,
                    "rolling_backtest: no rows left after train_days");

  const Dataset full = make_windows(series, window, horizon);
  if (shape.input_dim != full.feature_dim)
    throw ConfigError("rolling_backtest: shape input_dim " + std::to_string(shape.input_dim) +
                      " does not match windowed feature_dim " +
                      std::to_string(full.feature_dim));

  std::vector<BacktestSeries> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) out.push_back(BacktestSeries{spec, {}});

  std::vector<TrainedTriple> triples;
  long step = 0;
  for (long cutoff = train_days; cutoff < n; cutoff += horizon, ++step) {
    if (step % retrain_every == 0) {
      // Samples 0..m-1 have targets at rows < cutoff.
      const long m = cutoff - window - horizon + 1;
      Dataset train_ds;
      train_ds.feature_dim = full.feature_dim;
      train_ds.feature_names = full.feature_names;
      train_ds.samples.assign(full.samples.begin(), full.samples.begin() + m);
      triples = train_triples(train_ds, shape, specs, cfg, tricks);
      if (first_triples && step == 0) *first_triples = triples;
    }
    const long block_end = std::min(cutoff + horizon, n);
    for (long t = cutoff; t < block_end; ++t) {
      const Sample& s = full.samples[std::size_t(t - window - horizon + 1)];
      for (std::size_t si = 0; si < specs.size(); ++si)
        out[si].points.push_back(BacktestPoint{series.timestamps[std::size_t(t)],
                                               predict_interval(triples[si], s.features),
                                               series.values[std::size_t(t)]});
    }
  }
  return out;
}

inline std::vector<BacktestPoint> rolling_backtest(const SeriesFrame& series, int window,
                                                   int horizon, const IntervalSpec& spec,
                                                   const NetworkShape& shape,
                                                   const TrainConfig& cfg, const Tricks& tricks,
                                                   int train_days, int retrain_every = 1) {
  auto all = rolling_backtest(series, window, horizon, std::vector<IntervalSpec>{spec}, shape,
                              cfg, tricks, train_days, retrain_every);
  return std::move(all.front().points);
}

}  // namespace qpi
