#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qpi/common.hpp"

// Minimal scalar-output feed-forward network with hand-written reverse-mode
// gradients and a functional Adam step. No external linear algebra: layers
// here are small enough that naive loops are fast and easy to audit.

namespace qpi {

enum class Activation { relu, tanh };

inline const char* to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "' (expected relu or tanh)");
}

// Row-major dense matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * std::size_t(c), 0.0) {}

  double& operator()(int r, int c) { return data[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }
  double operator()(int r, int c) const { return data[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }

  bool operator==(const Matrix&) const = default;
};

// Topology only. The output layer is always linear with a single unit, so a
// shape with no hidden layers is a plain affine model.
struct NetworkShape {
  int input_dim = 1;
  std::vector<int> hidden_layers;
  Activation activation = Activation::relu;

  void validate() const {
    if (input_dim < 1)
      throw ConfigError("network input_dim must be >= 1, got " + std::to_string(input_dim));
    for (int w : hidden_layers)
      if (w < 1) throw ConfigError("hidden layer widths must be >= 1, got " + std::to_string(w));
  }

  // [input_dim, hidden..., 1]
  std::vector<int> layer_dims() const {
    std::vector<int> dims;
    dims.reserve(hidden_layers.size() + 2);
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_layers.begin(), hidden_layers.end());
    dims.push_back(1);
    return dims;
  }

  bool operator==(const NetworkShape&) const = default;
};

struct NetworkParams {
  NetworkShape shape;
  std::vector<Matrix> weights;              // weights[l]: dims[l+1] x dims[l]
  std::vector<std::vector<double>> biases;  // biases[l]: dims[l+1]

  bool operator==(const NetworkParams&) const = default;
};

// Same layout as NetworkParams; also reused for Adam moment storage.
struct Gradient {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  void set_zero() {
    for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
  }

  bool operator==(const Gradient&) const = default;
};

inline Gradient zero_gradient(const NetworkParams& p) {
  Gradient g;
  g.weights.reserve(p.weights.size());
  for (const auto& w : p.weights) g.weights.emplace_back(w.rows, w.cols);
  g.biases.reserve(p.biases.size());
  for (const auto& b : p.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

inline bool same_layout(const NetworkParams& p, const Gradient& g) {
  if (g.weights.size() != p.weights.size() || g.biases.size() != p.biases.size()) return false;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (g.weights[l].rows != p.weights[l].rows || g.weights[l].cols != p.weights[l].cols)
      return false;
    if (g.biases[l].size() != p.biases[l].size()) return false;
  }
  return true;
}

struct AdamState {
  Gradient first_moment;
  Gradient second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState init_adam(const NetworkParams& p, double beta1 = 0.9, double beta2 = 0.999,
                           double epsilon = 1e-8) {
  return AdamState{zero_gradient(p), zero_gradient(p), 0, beta1, beta2, epsilon};
}

// Weights drawn uniformly from +-sqrt(6 / fan_in), biases zero. Same
// (shape, seed) pair gives bit-identical parameters.
inline NetworkParams init_params(const NetworkShape& shape, std::uint64_t seed) {
  shape.validate();
  const auto dims = shape.layer_dims();
  NetworkParams p;
  p.shape = shape;
  auto eng = rng::make_engine(seed, rng::stream_init_params);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Matrix w(dims[l + 1], dims[l]);
    const double limit = std::sqrt(6.0 / double(dims[l]));
    for (auto& v : w.data) v = rng::uniform(eng, -limit, limit);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(std::size_t(dims[l + 1]), 0.0);
  }
  return p;
}

namespace detail {

inline double activate(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// relu derivative at exactly 0 is taken as 0 (the flat branch).
inline double activate_grad(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

inline void check_input(const NetworkParams& p, std::span<const double> x) {
  if (int(x.size()) != p.shape.input_dim)
    throw ConfigError("forward: got " + std::to_string(x.size()) + " features, network expects " +
                      std::to_string(p.shape.input_dim));
}

}  // namespace detail

// Intermediates kept by forward_trace for the reverse pass. post[0] is the
// input; pre[l] and post[l+1] are layer l's pre- and post-activation values.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

inline double forward_trace(const NetworkParams& p, std::span<const double> x,
                            ForwardTrace& tr) {
  detail::check_input(p, x);
  const std::size_t layers = p.weights.size();
  tr.pre.resize(layers);
  tr.post.resize(layers + 1);
  tr.post[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& w = p.weights[l];
    const auto& in = tr.post[l];
    auto& z = tr.pre[l];
    z.assign(std::size_t(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
      double s = p.biases[l][std::size_t(r)];
      const double* wr = &w.data[std::size_t(r) * std::size_t(w.cols)];
      for (int c = 0; c < w.cols; ++c) s += wr[c] * in[std::size_t(c)];
      z[std::size_t(r)] = s;
    }
    auto& out = tr.post[l + 1];
    out.resize(z.size());
    if (l + 1 == layers) {
      out = z;  // output layer stays linear
    } else {
      for (std::size_t r = 0; r < z.size(); ++r)
        out[r] = detail::activate(p.shape.activation, z[r]);
    }
  }
  return tr.post[layers][0];
}

inline double forward(const NetworkParams& p, std::span<const double> x) {
  ForwardTrace tr;
  return forward_trace(p, x, tr);
}

// Adds upstream * d(output)/d(theta) into grad. Exact reverse-mode transcript
// of forward_trace, so finite differences must agree with it off relu kinks.
inline void backward_accumulate(const NetworkParams& p, const ForwardTrace& tr, double upstream,
                                Gradient& grad) {
  const std::size_t layers = p.weights.size();
  std::vector<double> delta{upstream};  // d loss / d pre[l]
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& w = p.weights[l];
    const auto& in = tr.post[l];
    Matrix& gw = grad.weights[l];
    auto& gb = grad.biases[l];
    for (int r = 0; r < w.rows; ++r) {
      const double d = delta[std::size_t(r)];
      gb[std::size_t(r)] += d;
      double* gwr = &gw.data[std::size_t(r) * std::size_t(w.cols)];
      for (int c = 0; c < w.cols; ++c) gwr[c] += d * in[std::size_t(c)];
    }
    if (l == 0) break;
    std::vector<double> prev(std::size_t(w.cols), 0.0);
    for (int r = 0; r < w.rows; ++r) {
      const double d = delta[std::size_t(r)];
      const double* wr = &w.data[std::size_t(r) * std::size_t(w.cols)];
      for (int c = 0; c < w.cols; ++c) prev[std::size_t(c)] += d * wr[c];
    }
    const auto& z = tr.pre[l - 1];
    for (std::size_t c = 0; c < prev.size(); ++c)
      prev[c] *= detail::activate_grad(p.shape.activation, z[c]);
    delta = std::move(prev);
  }
}

inline Gradient backward(const NetworkParams& p, std::span<const double> x, double upstream) {
  ForwardTrace tr;
  forward_trace(p, x, tr);
  Gradient g = zero_gradient(p);
  backward_accumulate(p, tr, upstream, g);
  return g;
}

// One bias-corrected Adam update. Functional: inputs are untouched, the
// advanced (params, state) pair is returned. Rejects non-finite gradients so
// a diverging run fails loudly instead of poisoning the moments.
inline std::pair<NetworkParams, AdamState> adam_step(const NetworkParams& params,
                                                     const AdamState& state, const Gradient& grad,
                                                     double lr) {
  if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
  if (!same_layout(params, grad) || !same_layout(params, state.first_moment) ||
      !same_layout(params, state.second_moment))
    throw ConfigError("adam_step: gradient/moment layout does not match parameters");
  for (const auto& w : grad.weights)
    for (double v : w.data)
      if (!std::isfinite(v)) throw DivergenceError("adam_step: non-finite weight gradient");
  for (const auto& b : grad.biases)
    for (double v : b)
      if (!std::isfinite(v)) throw DivergenceError("adam_step: non-finite bias gradient");

  NetworkParams p = params;
  AdamState s = state;
  s.step_count += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, double(s.step_count));
  const double bc2 = 1.0 - std::pow(s.beta2, double(s.step_count));

  auto update = [&](double& theta, double& m, double& v, double g) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g * g;
    theta -= lr * (m / bc1) / (std::sqrt(v / bc2) + s.epsilon);
  };

  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l].data;
    auto& mw = s.first_moment.weights[l].data;
    auto& vw = s.second_moment.weights[l].data;
    for (std::size_t i = 0; i < w.size(); ++i) update(w[i], mw[i], vw[i], grad.weights[l].data[i]);
    auto& b = p.biases[l];
    auto& mb = s.first_moment.biases[l];
    auto& vb = s.second_moment.biases[l];
    for (std::size_t i = 0; i < b.size(); ++i) update(b[i], mb[i], vb[i], grad.biases[l][i]);
  }
  return {std::move(p), std::move(s)};
}

}  // namespace qpi
