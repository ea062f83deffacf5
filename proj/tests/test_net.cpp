#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "qpi/net.hpp"
#include "qpi/serialize.hpp"
#include "support/gradcheck.hpp"

using qpi::Activation;
using qpi::ConfigError;
using qpi::DivergenceError;
using qpi::NetworkParams;
using qpi::NetworkShape;

namespace {

NetworkParams affine_params(std::vector<double> w, double b) {
  NetworkParams p;
  p.shape.input_dim = int(w.size());
  qpi::Matrix m(1, int(w.size()));
  m.data = std::move(w);
  p.weights.push_back(std::move(m));
  p.biases.push_back({b});
  return p;
}

}  // namespace

TEST_CASE("shape validation and layer dims") {
  NetworkShape s;
  s.input_dim = 3;
  s.hidden_layers = {4, 2};
  REQUIRE(s.layer_dims() == std::vector<int>{3, 4, 2, 1});
  REQUIRE_NOTHROW(s.validate());

  s.input_dim = 0;
  REQUIRE_THROWS_AS(s.validate(), ConfigError);
  s.input_dim = 3;
  s.hidden_layers = {4, 0};
  REQUIRE_THROWS_AS(s.validate(), ConfigError);

  REQUIRE(qpi::activation_from_string("relu") == Activation::relu);
  REQUIRE(qpi::activation_from_string("tanh") == Activation::tanh);
  REQUIRE_THROWS_AS(qpi::activation_from_string("gelu"), ConfigError);
}

TEST_CASE("initialisation layout, bounds and determinism") {
  NetworkShape s;
  s.input_dim = 3;
  s.hidden_layers = {4, 2};

  const auto p = qpi::init_params(s, 42);
  REQUIRE(p.weights.size() == 3);
  REQUIRE(p.weights[0].rows == 4);
  REQUIRE(p.weights[0].cols == 3);
  REQUIRE(p.weights[1].rows == 2);
  REQUIRE(p.weights[1].cols == 4);
  REQUIRE(p.weights[2].rows == 1);
  REQUIRE(p.weights[2].cols == 2);
  REQUIRE(p.biases.size() == 3);
  REQUIRE(p.biases[0] == std::vector<double>(4, 0.0));
  REQUIRE(p.biases[1] == std::vector<double>(2, 0.0));
  REQUIRE(p.biases[2] == std::vector<double>(1, 0.0));

  const double limits[] = {std::sqrt(6.0 / 3.0), std::sqrt(6.0 / 4.0), std::sqrt(6.0 / 2.0)};
  for (std::size_t l = 0; l < 3; ++l)
    for (double v : p.weights[l].data) REQUIRE(std::abs(v) <= limits[l]);

  REQUIRE(p == qpi::init_params(s, 42));
  REQUIRE(p != qpi::init_params(s, 43));
}

TEST_CASE("forward of an affine model") {
  const auto bias_only = affine_params({0.0, 0.0}, 7.5);
  const std::vector<double> x1{3.0, -9.0};
  REQUIRE(qpi::forward(bias_only, x1) == 7.5);

  const auto lin = affine_params({2.0, -3.0}, 0.5);
  const std::vector<double> x2{1.0, 1.0};
  const std::vector<double> x3{0.25, -1.0};
  REQUIRE(qpi::forward(lin, x2) == -0.5);
  REQUIRE(qpi::forward(lin, x3) == 4.0);
}

TEST_CASE("affine model reproduces the dot product exactly") {
  auto eng = qpi::rng::make_engine(301);
  for (int rep = 0; rep < 100; ++rep) {
    NetworkShape s;
    s.input_dim = 1 + int(qpi::rng::uniform01(eng) * 8.0);
    const auto p = qpi::init_params(s, eng());
    std::vector<double> x(std::size_t(s.input_dim));
    for (auto& v : x) v = qpi::rng::uniform(eng, -3.0, 3.0);
    // Same accumulation order as the forward pass, so equality is exact.
    double expect = p.biases[0][0];
    for (int c = 0; c < s.input_dim; ++c) expect += p.weights[0].data[std::size_t(c)] * x[std::size_t(c)];
    REQUIRE(qpi::forward(p, x) == expect);
  }
}

TEST_CASE("relu zeroes negative pre-activations") {
  NetworkParams p;
  p.shape.input_dim = 2;
  p.shape.hidden_layers = {3};
  p.shape.activation = Activation::relu;
  qpi::Matrix w1(3, 2);
  w1.data = {-1, -1, -1, -1, -1, -1};
  qpi::Matrix w2(1, 3);
  w2.data = {5.0, -2.0, 1.0};
  p.weights = {w1, w2};
  p.biases = {{-0.5, -1.0, -2.0}, {0.25}};

  // All hidden units are dead for positive inputs: output is the top bias.
  const std::vector<double> x{1.0, 2.0};
  REQUIRE(qpi::forward(p, x) == 0.25);
  const std::vector<double> origin{0.0, 0.0};
  REQUIRE(qpi::forward(p, origin) == 0.25);

  // ...and the first-layer gradient vanishes there too.
  const auto g = qpi::backward(p, x, 1.0);
  for (double v : g.weights[0].data) REQUIRE(v == 0.0);
  for (double v : g.biases[0]) REQUIRE(v == 0.0);
  REQUIRE(g.biases[1][0] == 1.0);
}

TEST_CASE("forward rejects mismatched input width") {
  const auto p = affine_params({1.0, 2.0, 3.0}, 0.0);
  const std::vector<double> x{1.0, 2.0};
  REQUIRE_THROWS_AS(qpi::forward(p, x), ConfigError);
}

TEST_CASE("backward of an affine model is exact") {
  auto eng = qpi::rng::make_engine(302);
  for (int rep = 0; rep < 50; ++rep) {
    const auto p = affine_params({qpi::rng::uniform(eng, -2, 2), qpi::rng::uniform(eng, -2, 2)},
                                 qpi::rng::uniform(eng, -2, 2));
    const std::vector<double> x{qpi::rng::uniform(eng, -3, 3), qpi::rng::uniform(eng, -3, 3)};
    const double up = qpi::rng::uniform(eng, -2, 2);
    const auto g = qpi::backward(p, x, up);
    REQUIRE(g.biases[0][0] == up);
    REQUIRE(g.weights[0].data[0] == up * x[0]);
    REQUIRE(g.weights[0].data[1] == up * x[1]);
  }
}

TEST_CASE("zero upstream gives a zero gradient") {
  NetworkShape s;
  s.input_dim = 4;
  s.hidden_layers = {5};
  s.activation = Activation::tanh;
  const auto p = qpi::init_params(s, 9);
  const std::vector<double> x{0.3, -0.7, 1.1, 0.0};
  REQUIRE(qpi::backward(p, x, 0.0) == qpi::zero_gradient(p));
}

TEST_CASE("analytic gradients match finite differences on random nets") {
  testsupport::ConfigSampler sampler(303);
  for (int rep = 0; rep < 100; ++rep) {
    auto [params, x] = sampler.next();
    const auto analytic = qpi::backward(params, x, 1.0);
    const auto fd = testsupport::fd_gradient(params, x);
    const auto cmp = testsupport::compare_gradients(analytic, fd);
    INFO("rep " << rep << " worst relative error " << cmp.worst_rel);
    REQUIRE(cmp.ok);
  }
}

TEST_CASE("gradient accumulation adds across calls") {
  testsupport::ConfigSampler sampler(304);
  auto [params, x] = sampler.next();
  qpi::ForwardTrace tr;
  qpi::forward_trace(params, x, tr);
  auto acc = qpi::zero_gradient(params);
  qpi::backward_accumulate(params, tr, 0.75, acc);
  qpi::backward_accumulate(params, tr, 0.75, acc);
  const auto once = qpi::backward(params, x, 0.75);
  for (std::size_t l = 0; l < acc.weights.size(); ++l) {
    for (std::size_t i = 0; i < acc.weights[l].data.size(); ++i)
      REQUIRE(acc.weights[l].data[i] == Catch::Approx(2.0 * once.weights[l].data[i]).margin(1e-15));
    for (std::size_t i = 0; i < acc.biases[l].size(); ++i)
      REQUIRE(acc.biases[l][i] == Catch::Approx(2.0 * once.biases[l][i]).margin(1e-15));
  }
}

TEST_CASE("adam with a zero gradient leaves parameters untouched") {
  NetworkShape s;
  s.input_dim = 2;
  s.hidden_layers = {3};
  const auto p = qpi::init_params(s, 5);
  const auto st = qpi::init_adam(p);
  const auto [p2, st2] = qpi::adam_step(p, st, qpi::zero_gradient(p), 0.01);
  REQUIRE(p2 == p);
  REQUIRE(st2.step_count == 1);
  REQUIRE(st2.first_moment == qpi::zero_gradient(p));
  REQUIRE(st2.second_moment == qpi::zero_gradient(p));
}

TEST_CASE("adam first step has the closed form lr * g / (|g| + eps)") {
  const auto p = affine_params({0.3}, -0.2);
  auto g = qpi::zero_gradient(p);
  g.weights[0].data[0] = 0.5;
  g.biases[0][0] = -1.25;
  const double lr = 0.01;
  const auto [p2, st2] = qpi::adam_step(p, qpi::init_adam(p), g, lr);
  // Bias correction cancels on step one, leaving a pure sign step.
  REQUIRE(p2.weights[0].data[0] ==
          Catch::Approx(0.3 - lr * 0.5 / (0.5 + 1e-8)).margin(1e-14));
  REQUIRE(p2.biases[0][0] ==
          Catch::Approx(-0.2 + lr * 1.25 / (1.25 + 1e-8)).margin(1e-14));
  REQUIRE(st2.step_count == 1);
}

TEST_CASE("adam is deterministic") {
  NetworkShape s;
  s.input_dim = 3;
  s.hidden_layers = {4};
  const auto p = qpi::init_params(s, 21);
  const std::vector<double> x{0.1, -0.4, 0.9};
  const auto g = qpi::backward(p, x, 0.8);

  auto st = qpi::init_adam(p);
  const auto [pa, sta] = qpi::adam_step(p, st, g, 1e-3);
  const auto [pb, stb] = qpi::adam_step(p, st, g, 1e-3);
  REQUIRE(pa == pb);
  REQUIRE(sta.first_moment == stb.first_moment);
  REQUIRE(sta.second_moment == stb.second_moment);

  // A second chained step is deterministic too.
  const auto [pa2, sta2] = qpi::adam_step(pa, sta, g, 1e-3);
  const auto [pb2, stb2] = qpi::adam_step(pb, stb, g, 1e-3);
  REQUIRE(pa2 == pb2);
  REQUIRE(sta2.step_count == 2);
}

TEST_CASE("adam rejects bad inputs") {
  const auto p = affine_params({1.0}, 0.0);
  auto g = qpi::zero_gradient(p);
  REQUIRE_THROWS_AS(qpi::adam_step(p, qpi::init_adam(p), g, 0.0), ConfigError);
  REQUIRE_THROWS_AS(qpi::adam_step(p, qpi::init_adam(p), g, -1.0), ConfigError);

  g.weights[0].data[0] = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(qpi::adam_step(p, qpi::init_adam(p), g, 1e-3), DivergenceError);
  g.weights[0].data[0] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(qpi::adam_step(p, qpi::init_adam(p), g, 1e-3), DivergenceError);

  const auto wide = affine_params({1.0, 2.0}, 0.0);
  REQUIRE_THROWS_AS(qpi::adam_step(p, qpi::init_adam(p), qpi::zero_gradient(wide), 1e-3),
                    ConfigError);
}

TEST_CASE("adam shrinking steps move toward a quadratic minimum") {
  // Sanity: minimise (w - 3)^2 for a single scalar weight.
  auto p = affine_params({0.0}, 0.0);
  auto st = qpi::init_adam(p);
  for (int i = 0; i < 2000; ++i) {
    auto g = qpi::zero_gradient(p);
    g.weights[0].data[0] = 2.0 * (p.weights[0].data[0] - 3.0);
    std::tie(p, st) = qpi::adam_step(p, st, g, 0.05);
  }
  REQUIRE(p.weights[0].data[0] == Catch::Approx(3.0).margin(1e-3));
}

TEST_CASE("parameter serialisation round-trips bit-exactly") {
  testsupport::ConfigSampler sampler(305);
  for (int rep = 0; rep < 5; ++rep) {
    auto [params, x] = sampler.next();
    const auto j = qpi::to_json(params);
    const auto back = qpi::params_from_json(j);
    REQUIRE(back == params);
    // Through text as well, not just the DOM.
    const auto text = j.dump();
    REQUIRE(qpi::params_from_json(nlohmann::json::parse(text)) == params);
  }
}

TEST_CASE("parameter deserialisation validates") {
  NetworkShape s;
  s.input_dim = 2;
  s.hidden_layers = {3};
  const auto p = qpi::init_params(s, 77);
  auto j = qpi::to_json(p);

  auto bad_version = j;
  bad_version["format_version"] = 999;
  REQUIRE_THROWS_AS(qpi::params_from_json(bad_version), qpi::DataError);

  auto bad_dims = j;
  bad_dims["weights"][0]["rows"] = 5;
  REQUIRE_THROWS_AS(qpi::params_from_json(bad_dims), qpi::DataError);

  auto missing = j;
  missing.erase("biases");
  REQUIRE_THROWS_AS(qpi::params_from_json(missing), qpi::DataError);

  auto not_finite = j;
  not_finite["weights"][0]["data"][0] = "nan";
  REQUIRE_THROWS_AS(qpi::params_from_json(not_finite), qpi::DataError);
}
