#pragma once

#include <string>

#include "qpi/common.hpp"

namespace qpi {

// Probability level a model is pulled towards. Open interval: 0 and 1 would
// ask for the essential infimum/supremum, which no finite loss recovers.
struct QuantileLevel {
  double value;

  explicit QuantileLevel(double alpha) : value(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw ConfigError("quantile level must lie in (0, 1), got " + format_double(alpha));
  }
};

enum class OrderingSide { lower_bound, upper_bound };

// Asymmetric absolute error: over-prediction costs (1 - alpha) per unit,
// under-prediction costs alpha per unit. In expectation this is minimised by
// the alpha-quantile of the target, which is the whole point.
inline double pinball(double y, double yhat, QuantileLevel alpha) {
  const double r = y - yhat;
  return r < 0.0 ? (1.0 - alpha.value) * (-r) : alpha.value * r;
}

// d/d yhat of pinball. At the kink y == yhat we return -alpha, matching the
// branch the loss itself assigns to the tie.
inline double pinball_grad(double y, double yhat, QuantileLevel alpha) {
  return y < yhat ? (1.0 - alpha.value) : -alpha.value;
}

namespace detail {
inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0))
    throw ConfigError("ordering penalty weight must be nonnegative, got " + format_double(lambda));
}
}  // namespace detail

// Hinge on the gap between a bound and a reference prediction. Zero whenever
// the bound sits on its correct side (ties included), linear in the violation
// otherwise. A large lambda approximates a hard ordering constraint while
// keeping the objective finite and optimisable.
inline double ordering_penalty(double bound, double reference, OrderingSide side, double lambda) {
  detail::check_lambda(lambda);
  const double violation =
      side == OrderingSide::upper_bound ? reference - bound : bound - reference;
  return violation > 0.0 ? lambda * violation : 0.0;
}

// Subgradient w.r.t. the bound; 0 at the hinge corner.
inline double ordering_penalty_grad(double bound, double reference, OrderingSide side,
                                    double lambda) {
  detail::check_lambda(lambda);
  if (side == OrderingSide::upper_bound) return bound < reference ? -lambda : 0.0;
  return bound > reference ? lambda : 0.0;
}

// Training objective for an interval endpoint: quantile fit plus the
// ordering hinge against the centre model's prediction.
inline double bound_loss(double y, double yhat, QuantileLevel alpha, double reference,
                         OrderingSide side, double lambda) {
  return pinball(y, yhat, alpha) + ordering_penalty(yhat, reference, side, lambda);
}

inline double bound_loss_grad(double y, double yhat, QuantileLevel alpha, double reference,
                              OrderingSide side, double lambda) {
  return pinball_grad(y, yhat, alpha) + ordering_penalty_grad(yhat, reference, side, lambda);
}

}  // namespace qpi
