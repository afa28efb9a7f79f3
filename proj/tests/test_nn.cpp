#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "marblix/checkpoint.hpp"
#include "marblix/nn.hpp"

#include <cstdio>
#include <filesystem>

using namespace marblix;

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

Vec random_vec(Rng& rng, Index n, double scale = 1.0) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

// GradTarget over a layer's flattened parameters for a fixed input and a
// fixed linear functional c . y of the output.
GradTarget layer_param_target(const DenseLayer<double>& layer, const Vec& x, const Vec& c) {
  auto rebuild = [layer, x](const Vec& params) {
    DenseLayer<double> probe = layer;
    Index k = 0;
    for (Index i = 0; i < probe.weights.rows(); ++i) {
      for (Index j = 0; j < probe.weights.cols(); ++j) probe.weights(i, j) = params[k++];
    }
    for (Index i = 0; i < probe.bias.size(); ++i) probe.bias[i] = params[k++];
    return probe.forward(x);
  };
  GradTarget target;
  target.value = [rebuild, c](const Vec& params) { return c.dot(rebuild(params)); };
  target.gradient = [layer, x, c](const Vec& params) {
    DenseLayer<double> probe = layer;
    Index k = 0;
    for (Index i = 0; i < probe.weights.rows(); ++i) {
      for (Index j = 0; j < probe.weights.cols(); ++j) probe.weights(i, j) = params[k++];
    }
    for (Index i = 0; i < probe.bias.size(); ++i) probe.bias[i] = params[k++];

    Mlp<double> net;
    net.add_layer(probe.in_dim(), probe.out_dim(), probe.activation);
    net.layers()[0] = probe;
    Mlp<double>::Trace trace;
    net.forward_trace(Mat(x), trace);
    Gradients<double> grads;
    net.backward(trace, Mat(c), grads);

    Vec out(params.size());
    k = 0;
    for (Index i = 0; i < grads.weights[0].rows(); ++i) {
      for (Index j = 0; j < grads.weights[0].cols(); ++j) out[k++] = grads.weights[0](i, j);
    }
    for (Index i = 0; i < grads.bias[0].size(); ++i) out[k++] = grads.bias[0][i];
    return out;
  };
  return target;
}

Vec flatten_layer_params(const DenseLayer<double>& layer) {
  Vec params(layer.weights.size() + layer.bias.size());
  Index k = 0;
  for (Index i = 0; i < layer.weights.rows(); ++i) {
    for (Index j = 0; j < layer.weights.cols(); ++j) params[k++] = layer.weights(i, j);
  }
  for (Index i = 0; i < layer.bias.size(); ++i) params[k++] = layer.bias[i];
  return params;
}

}  // namespace

TEST_CASE("dense forward: identity weights and zero bias pass the input through") {
  DenseLayer<double> layer(3, 3, Activation::Linear);
  layer.weights = Mat::Identity(3, 3);
  Vec x(3);
  x << 1.5, -2.0, 0.25;
  CHECK(layer.forward(x).isApprox(x));
}

TEST_CASE("dense forward: ReLU clips a negative pre-activation") {
  DenseLayer<double> layer(2, 1, Activation::ReLU);
  layer.weights << 1.0, 1.0;
  layer.bias << -3.0;
  Vec x(2);
  x << 1.0, 1.0;
  CHECK(layer.forward(x)[0] == 0.0);  // 1 + 1 - 3 = -1, clipped
}

TEST_CASE("dense forward: zero weights through tanh give zero") {
  DenseLayer<double> layer(1, 1, Activation::Tanh);
  Vec x(1);
  x << 123.0;
  CHECK(layer.forward(x)[0] == 0.0);
}

TEST_CASE("dense forward: shape mismatch throws") {
  DenseLayer<double> layer(3, 2, Activation::Linear);
  Vec x(4);
  x.setZero();
  CHECK_THROWS_AS(layer.forward(x), DimensionError);
}

TEST_CASE("dense backward: 1x1 linear layer follows the product rule") {
  Mlp<double> net;
  net.add_layer(1, 1, Activation::Linear);
  net.layers()[0].weights << 2.5;
  net.layers()[0].bias << 0.75;
  Mat x(1, 1);
  x << 3.0;
  Mlp<double>::Trace trace;
  net.forward_trace(x, trace);
  Gradients<double> grads;
  Mat upstream(1, 1);
  upstream << 1.0;
  Mat grad_x = net.backward(trace, upstream, grads);
  CHECK(grads.weights[0](0, 0) == 3.0);  // x
  CHECK(grads.bias[0][0] == 1.0);
  CHECK(grad_x(0, 0) == 2.5);  // W
}

TEST_CASE("dense backward: an inactive ReLU unit blocks every gradient") {
  Mlp<double> net;
  net.add_layer(2, 1, Activation::ReLU);
  net.layers()[0].weights << 1.0, 1.0;
  net.layers()[0].bias << -10.0;
  Mat x(2, 1);
  x << 1.0, 2.0;
  Mlp<double>::Trace trace;
  net.forward_trace(x, trace);
  Gradients<double> grads;
  Mat upstream(1, 1);
  upstream << 1.0;
  Mat grad_x = net.backward(trace, upstream, grads);
  CHECK(grads.weights[0].isZero());
  CHECK(grads.bias[0].isZero());
  CHECK(grad_x.isZero());
}

TEST_CASE("dense backward matches central finite differences on random layers") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    // Tanh keeps the map smooth everywhere; ReLU layers are covered by the
    // margin-filtered case below.
    DenseLayer<double> layer(4, 3, Activation::Tanh);
    layer.init(rng);
    Vec x = random_vec(rng, 4);
    Vec c = random_vec(rng, 3);

    GradTarget target = layer_param_target(layer, x, c);
    CHECK(grad_check(target, flatten_layer_params(layer), 1e-5) < 1e-4);
  }
}

TEST_CASE("dense backward matches finite differences through ReLU away from the kink") {
  Rng rng(7);
  int accepted = 0;
  while (accepted < 5) {
    DenseLayer<double> layer(4, 3, Activation::ReLU);
    layer.init(rng);
    Vec x = random_vec(rng, 4);
    if ((layer.weights * x + layer.bias).cwiseAbs().minCoeff() < 0.05) continue;  // near kink
    ++accepted;
    Vec c = random_vec(rng, 3);
    GradTarget target = layer_param_target(layer, x, c);
    CHECK(grad_check(target, flatten_layer_params(layer), 1e-5) < 1e-4);
  }
}

TEST_CASE("mse loss: zero on equal vectors, mean of squares otherwise") {
  Vec a(2), b(2);
  a << 0.4, -1.2;
  CHECK(mse_loss<double>(a, a).value == 0.0);
  CHECK(mse_loss<double>(a, a).grad.isZero());

  a << 1.0, 1.0;
  b << 0.0, 0.0;
  auto loss = mse_loss<double>(a, b);
  CHECK(loss.value == doctest::Approx(1.0));
  CHECK(loss.grad.isApprox(Vec::Ones(2)));  // 2 * diff / n

  Vec c(3);
  CHECK_THROWS_AS(mse_loss<double>(a, c), DimensionError);
}

TEST_CASE("mse loss gradient matches finite differences") {
  Rng rng(3);
  Vec target_vec = random_vec(rng, 6);
  Vec point = random_vec(rng, 6);
  GradTarget target;
  target.value = [target_vec](const Vec& p) { return mse_loss<double>(p, target_vec).value; };
  target.gradient = [target_vec](const Vec& p) { return mse_loss<double>(p, target_vec).grad; };
  CHECK(grad_check(target, point, 1e-5) < 1e-6);
}

TEST_CASE("triplet loss: inactive hinge when the anchor equals the positive") {
  Vec a(3), n(3);
  a << 0.1, 0.2, 0.3;
  n << 5.0, 5.0, 5.0;  // d(a, n) >= alpha
  auto loss = triplet_loss<double>(a, a, n, 0.4);
  CHECK(loss.value == 0.0);
  CHECK_FALSE(loss.active);
  CHECK(loss.grad_anchor.isZero());
  CHECK(loss.grad_positive.isZero());
  CHECK(loss.grad_negative.isZero());
}

TEST_CASE("triplet loss: direct arithmetic on the hinge") {
  Vec a(1), p(1), n(1);
  a << 0.0;
  p << 0.2;  // d(a, p) = 0.2
  n << 0.5;  // d(a, n) = 0.5
  CHECK(triplet_loss<double>(a, p, n, 0.4).value == doctest::Approx(0.1));
}

TEST_CASE("triplet loss gradients match finite differences on active triplets") {
  Rng rng(11);
  int accepted = 0;
  while (accepted < 10) {
    Vec a = random_vec(rng, 5);
    Vec p = random_vec(rng, 5);
    Vec n = random_vec(rng, 5);
    const double alpha = 0.5;
    const double d_ap = (a - p).norm();
    const double d_an = (a - n).norm();
    // Keep clear of the hinge boundary and the d = 0 singularities.
    if (d_ap < 0.1 || d_an < 0.1 || d_ap - d_an + alpha < 0.1) continue;
    ++accepted;

    Vec point(15);
    point << a, p, n;
    GradTarget target;
    target.value = [alpha](const Vec& x) {
      return triplet_loss<double>(x.segment(0, 5), x.segment(5, 5), x.segment(10, 5), alpha).value;
    };
    target.gradient = [alpha](const Vec& x) {
      auto loss = triplet_loss<double>(x.segment(0, 5), x.segment(5, 5), x.segment(10, 5), alpha);
      Vec g(15);
      g << loss.grad_anchor, loss.grad_positive, loss.grad_negative;
      return g;
    };
    CHECK(grad_check(target, point, 1e-5) < 1e-4);
  }
}

TEST_CASE("triplet loss is non-negative and zero whenever the margin is met") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    Vec a = random_vec(rng, 4);
    Vec p = random_vec(rng, 4);
    Vec n = random_vec(rng, 4);
    const double alpha = rng.uniform(0.0, 2.0);
    auto loss = triplet_loss<double>(a, p, n, alpha);
    CHECK(loss.value >= 0.0);
    if ((a - n).norm() >= (a - p).norm() + alpha) CHECK(loss.value == 0.0);
  }
}

TEST_CASE("adam: zero gradients are a fixed point") {
  Rng rng(5);
  Mlp<double> net;
  net.add_layer(3, 2, Activation::Tanh);
  net.init(rng);
  Mat saved_w = net.layers()[0].weights;

  AdamState<double> adam(net, {0.1});
  Gradients<double> zero;
  zero.weights.push_back(Mat::Zero(2, 3));
  zero.bias.push_back(Vec::Zero(2));
  for (int i = 0; i < 5; ++i) adam.step(net, zero);
  CHECK(net.layers()[0].weights == saved_w);
  CHECK(net.layers()[0].bias.isZero());
}

TEST_CASE("adam: first-step update magnitude follows the scalar hand computation") {
  // After one step from a fresh state: m-hat = g, v-hat = g^2, so the update
  // is lr * g / (|g| + eps).
  const double lr = 1e-3, g = 0.5, eps = 1e-8;
  Mat param(1, 1), grad(1, 1), m(1, 1), v(1, 1);
  param << 2.0;
  grad << g;
  m.setZero();
  v.setZero();
  adam_update(param, grad, m, v, 1, AdamConfig<double>{lr, 0.9, 0.999, eps});
  const double expected_delta = lr * g / (std::abs(g) + eps);
  CHECK(param(0, 0) == doctest::Approx(2.0 - expected_delta).epsilon(1e-12));
  CHECK(std::abs(2.0 - param(0, 0)) == doctest::Approx(lr).epsilon(1e-6));
}

TEST_CASE("adam: identical states and gradients update identically") {
  Rng rng(9);
  Mlp<double> a;
  a.add_layer(4, 4, Activation::ReLU);
  a.init(rng);
  Mlp<double> b = a;

  Gradients<double> grads;
  grads.weights.push_back(Mat::Constant(4, 4, 0.3));
  grads.bias.push_back(Vec::Constant(4, -0.2));
  AdamState<double> adam_a(a, {1e-2});
  AdamState<double> adam_b(b, {1e-2});
  for (int i = 0; i < 3; ++i) {
    adam_a.step(a, grads);
    adam_b.step(b, grads);
  }
  CHECK(a.layers()[0].weights == b.layers()[0].weights);
  CHECK(a.layers()[0].bias == b.layers()[0].bias);
}

TEST_CASE("grad_check: exact for a quadratic, loud for a wrong gradient") {
  GradTarget quadratic;
  quadratic.value = [](const Vec& x) { return x[0] * x[0]; };
  quadratic.gradient = [](const Vec& x) { return Vec(Vec::Constant(1, 2.0 * x[0])); };
  Vec at(1);
  at << 3.0;
  CHECK(grad_check(quadratic, at, 1e-5) < 1e-8);

  GradTarget doubled = quadratic;
  doubled.gradient = [](const Vec& x) { return Vec(Vec::Constant(1, 4.0 * x[0])); };
  CHECK(grad_check(doubled, at, 1e-5) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("forward passes are bit-deterministic") {
  Rng rng(31);
  Mlp<double> net;
  net.add_layer(6, 5, Activation::Tanh);
  net.add_layer(5, 4, Activation::ReLU);
  net.add_layer(4, 2, Activation::Linear);
  net.init(rng);
  Vec x = random_vec(rng, 6);
  Vec y1 = net.forward(x);
  Vec y2 = net.forward(x);
  CHECK(y1 == y2);
}

TEST_CASE("multi-layer gradients match finite differences end to end") {
  Rng rng(77);
  Mlp<double> net;
  net.add_layer(5, 7, Activation::Tanh);
  net.add_layer(7, 4, Activation::Tanh);
  net.add_layer(4, 3, Activation::Linear);
  net.init(rng);
  Vec x = random_vec(rng, 5);
  Vec target_vec = random_vec(rng, 3);

  GradTarget input_target;
  input_target.value = [&net, &target_vec](const Vec& p) {
    return mse_loss<double>(net.forward(p), target_vec).value;
  };
  input_target.gradient = [&net, &target_vec](const Vec& p) {
    Mlp<double>::Trace trace;
    net.forward_trace(Mat(p), trace);
    auto loss = mse_loss<double>(net.forward(p), target_vec);
    Gradients<double> grads;
    return Vec(net.backward(trace, Mat(loss.grad), grads).col(0));
  };
  CHECK(grad_check(input_target, x, 1e-5) < 1e-4);
}

TEST_CASE("checkpoint round trip preserves architecture and float32 parameters") {
  Rng rng(13);
  Mlp<double> net;
  net.add_layer(3, 4, Activation::ReLU);
  net.add_layer(4, 2, Activation::Tanh);
  net.init(rng);

  const std::string path = (std::filesystem::temp_directory_path() / "mblx_test.mblx").string();
  save_checkpoint(net, path);
  Mlp<double> loaded = load_checkpoint<double>(path);

  REQUIRE(loaded.layer_count() == 2);
  CHECK(loaded.dims() == net.dims());
  CHECK(loaded.layers()[0].activation == Activation::ReLU);
  CHECK(loaded.layers()[1].activation == Activation::Tanh);
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& a = net.layers()[l];
    const auto& b = loaded.layers()[l];
    for (Index i = 0; i < a.weights.rows(); ++i) {
      for (Index j = 0; j < a.weights.cols(); ++j) {
        CHECK(b.weights(i, j) == static_cast<double>(static_cast<float>(a.weights(i, j))));
      }
    }
    for (Index i = 0; i < a.bias.size(); ++i) {
      CHECK(b.bias[i] == static_cast<double>(static_cast<float>(a.bias[i])));
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects bad magic and truncation") {
  namespace fs = std::filesystem;
  const std::string bad = (fs::temp_directory_path() / "mblx_bad.mblx").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOPE1234";
  }
  CHECK_THROWS_AS(load_checkpoint<double>(bad), ParseError);
  {
    std::ofstream out(bad, std::ios::binary);
    out << "MBLX";  // ends before the version field
  }
  CHECK_THROWS_AS(load_checkpoint<double>(bad), ParseError);
  fs::remove(bad);
}
