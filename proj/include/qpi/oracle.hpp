#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qpi/common.hpp"
#include "qpi/loss.hpp"

// Reference implementations used to cross-check the trained models: order
// statistics, closed-form quantiles, grid search, and samplers. Everything
// here is deliberately simple and independent of the network code.

namespace qpi {

enum class DistKind { gaussian, laplace };

inline const char* to_string(DistKind k) {
  return k == DistKind::gaussian ? "gaussian" : "laplace";
}

inline DistKind dist_kind_from_string(std::string_view s) {
  if (s == "gaussian") return DistKind::gaussian;
  if (s == "laplace") return DistKind::laplace;
  throw ConfigError("unknown distribution kind '" + std::string(s) +
                    "' (expected gaussian or laplace)");
}

struct DistributionSpec {
  DistKind kind = DistKind::gaussian;
  double location = 0.0;
  double scale = 1.0;

  DistributionSpec() = default;
  DistributionSpec(DistKind k, double loc, double s) : kind(k), location(loc), scale(s) {
    if (!(s > 0.0))
      throw ConfigError("distribution scale must be positive, got " + format_double(s));
  }
};

// k-th order statistic with k = ceil(alpha * n): the smallest sample point
// holding at least alpha of the mass. The tiny slack guards against the
// product alpha * n landing an ulp above an integer.
inline double empirical_quantile(std::span<const double> samples, QuantileLevel alpha) {
  if (samples.empty()) throw ConfigError("empirical_quantile: empty sample list");
  const auto n = std::ssize(samples);
  auto k = static_cast<std::ptrdiff_t>(std::ceil(alpha.value * double(n) - 1e-9));
  k = std::clamp<std::ptrdiff_t>(k, 1, n);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  return sorted[std::size_t(k - 1)];
}

// Exhaustive scan of t -> sum_i pinball(y_i, t, alpha) over a regular grid.
// Ties resolve to the smallest grid point. Used as a dumb-but-trustworthy
// second opinion on what the loss actually prefers.
inline double minimize_loss_grid(std::span<const double> samples, QuantileLevel alpha, double lo,
                                 double hi, double step) {
  if (samples.empty()) throw ConfigError("minimize_loss_grid: empty sample list");
  if (!(step > 0.0))
    throw ConfigError("minimize_loss_grid: step must be positive, got " + format_double(step));
  if (!(lo < hi))
    throw ConfigError("minimize_loss_grid: lo must be below hi, got [" + format_double(lo) +
                      ", " + format_double(hi) + "]");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (lo > *mx || hi < *mn)
    throw ConfigError("minimize_loss_grid: suspect range [" + format_double(lo) + ", " +
                      format_double(hi) + "] excludes every sample value");

  double best_t = lo;
  double best = std::numeric_limits<double>::infinity();
  for (long i = 0;; ++i) {
    const double t = lo + double(i) * step;
    if (t > hi + step * 1e-9) break;
    double total = 0.0;
    for (double y : samples) total += pinball(y, t, alpha);
    if (total < best) {
      best = total;
      best_t = t;
    }
  }
  return best_t;
}

namespace detail {

// Rational approximation for the standard normal inverse CDF (A. Acklam),
// polished with one Halley step against erfc. Verified elsewhere against a
// bisection inversion; absolute error is far below 1e-9.
inline double inverse_normal_cdf(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

}  // namespace detail

// Closed-form quantile of the requested distribution.
inline double analytic_quantile(const DistributionSpec& dist, QuantileLevel alpha) {
  const double a = alpha.value;
  switch (dist.kind) {
    case DistKind::laplace:
      return a <= 0.5 ? dist.location + dist.scale * std::log(2.0 * a)
                      : dist.location - dist.scale * std::log(2.0 * (1.0 - a));
    case DistKind::gaussian:
      return dist.location + dist.scale * detail::inverse_normal_cdf(a);
  }
  throw ConfigError("analytic_quantile: unknown distribution kind");
}

// Streaming sampler. Laplace draws invert the CDF of a uniform; Gaussian
// draws use the Box-Muller pair transform (the spare is cached). Standard
// variates are scaled as location + scale * z, so two samplers with the same
// seed produce bit-identical z sequences regardless of the distribution's
// location and scale.
class Sampler {
 public:
  Sampler(const DistributionSpec& dist, std::uint64_t seed)
      : dist_(dist), eng_(rng::make_engine(seed, rng::stream_sampler)) {}

  double next() {
    double z;
    if (dist_.kind == DistKind::laplace) {
      const double u = rng::uniform01_open(eng_) - 0.5;
      z = u < 0.0 ? std::log1p(2.0 * u) : -std::log1p(-2.0 * u);
    } else if (has_spare_) {
      has_spare_ = false;
      z = spare_;
    } else {
      const double u1 = rng::uniform01_open(eng_);
      const double u2 = rng::uniform01(eng_);
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double t = 2.0 * std::numbers::pi * u2;
      z = r * std::cos(t);
      spare_ = r * std::sin(t);
      has_spare_ = true;
    }
    return dist_.location + dist_.scale * z;
  }

 private:
  DistributionSpec dist_;
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline std::vector<double> sample(const DistributionSpec& dist, std::size_t n,
                                  std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample: n must be >= 1");
  Sampler s(dist, seed);
  std::vector<double> out(n);
  for (auto& v : out) v = s.next();
  return out;
}

}  // namespace qpi
