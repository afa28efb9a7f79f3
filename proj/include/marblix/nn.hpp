#pragma once

#include "marblix/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace marblix {

enum class Activation : std::uint32_t { Linear = 0, ReLU = 1, Tanh = 2 };

const char* activation_name(Activation act);

// ---------------------------------------------------------------------------
// DenseLayer: y = act(W x + b). Batched variants treat columns as samples.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct DenseLayer {
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::Linear;

  DenseLayer(Index in_dim, Index out_dim, Activation act)
      : weights(Matrix::Zero(out_dim, in_dim)),
        bias(Vector::Zero(out_dim)),
        activation(act) {}

  Index in_dim() const { return weights.cols(); }
  Index out_dim() const { return weights.rows(); }

  // Glorot-uniform weights, zero bias. Fill order is fixed (column-major)
  // so a given seed always yields the same parameters.
  void init(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
    for (Index j = 0; j < weights.cols(); ++j) {
      for (Index i = 0; i < weights.rows(); ++i) {
        weights(i, j) = static_cast<Scalar>(rng.uniform(-limit, limit));
      }
    }
    bias.setZero();
  }

  static Matrix activate(const Matrix& z, Activation act) {
    switch (act) {
      case Activation::Linear: return z;
      case Activation::ReLU: return z.cwiseMax(Scalar(0));
      case Activation::Tanh: return z.array().tanh().matrix();
    }
    throw std::invalid_argument("unknown activation");
  }

  // Derivative of the activation expressed through its output value.
  static Matrix activation_grad_from_output(const Matrix& y, Activation act) {
    switch (act) {
      case Activation::Linear: return Matrix::Ones(y.rows(), y.cols());
      case Activation::ReLU: return (y.array() > Scalar(0)).template cast<Scalar>().matrix();
      case Activation::Tanh: return (Scalar(1) - y.array().square()).matrix();
    }
    throw std::invalid_argument("unknown activation");
  }

  Matrix forward(const Matrix& x) const {
    if (x.rows() != in_dim()) {
      throw DimensionError("dense_forward: input has " + std::to_string(x.rows()) +
                           " rows, layer expects " + std::to_string(in_dim()));
    }
    Matrix z = (weights * x).colwise() + bias;
    return activate(z, activation);
  }

  Vector forward(const Vector& x) const {
    Matrix y = forward(Matrix(x));
    return Vector(y.col(0));
  }
};

// Parameter gradients for a layer stack, aligned with Mlp::layers.
template <typename Scalar>
struct Gradients {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> bias;
};

// ---------------------------------------------------------------------------
// Mlp: a plain stack of dense layers.
// ---------------------------------------------------------------------------

template <typename Scalar>
class Mlp {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  Mlp() = default;

  void add_layer(Index in_dim, Index out_dim, Activation act) {
    if (!layers_.empty() && layers_.back().out_dim() != in_dim) {
      throw DimensionError("add_layer: in_dim " + std::to_string(in_dim) +
                           " does not match previous out_dim " +
                           std::to_string(layers_.back().out_dim()));
    }
    layers_.emplace_back(in_dim, out_dim, act);
  }

  void init(Rng& rng) {
    for (auto& layer : layers_) layer.init(rng);
  }

  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }

  Index in_dim() const { return layers_.front().in_dim(); }
  Index out_dim() const { return layers_.back().out_dim(); }

  // [in_0, out_0, out_1, ..., out_{L-1}] — used by the architecture audits.
  std::vector<Index> dims() const {
    std::vector<Index> d;
    d.push_back(in_dim());
    for (const auto& layer : layers_) d.push_back(layer.out_dim());
    return d;
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
      n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    }
    return n;
  }

  Matrix forward(const Matrix& x) const { return forward_prefix(x, layers_.size()); }

  Vector forward(const Vector& x) const {
    Matrix y = forward(Matrix(x));
    return Vector(y.col(0));
  }

  // Runs only the first n_layers layers (used to read a bottleneck).
  Matrix forward_prefix(const Matrix& x, std::size_t n_layers) const {
    Matrix y = x;
    for (std::size_t i = 0; i < n_layers; ++i) y = layers_[i].forward(y);
    return y;
  }

  Vector forward_prefix(const Vector& x, std::size_t n_layers) const {
    Matrix y = forward_prefix(Matrix(x), n_layers);
    return Vector(y.col(0));
  }

  // Forward pass that keeps every layer's output for the backward pass.
  // activations[0] is the input, activations[i + 1] the output of layer i.
  struct Trace {
    std::vector<Matrix> activations;
  };

  Matrix forward_trace(const Matrix& x, Trace& trace) const {
    trace.activations.clear();
    trace.activations.reserve(layers_.size() + 1);
    trace.activations.push_back(x);
    for (const auto& layer : layers_) {
      trace.activations.push_back(layer.forward(trace.activations.back()));
    }
    return trace.activations.back();
  }

  // Exact analytic gradients for the whole stack; returns dL/dinput.
  Matrix backward(const Trace& trace, const Matrix& output_grad, Gradients<Scalar>& grads) const {
    if (trace.activations.size() != layers_.size() + 1) {
      throw DimensionError("backward: trace does not match layer count");
    }
    grads.weights.resize(layers_.size());
    grads.bias.resize(layers_.size());
    Matrix upstream = output_grad;
    for (std::size_t idx = layers_.size(); idx-- > 0;) {
      const auto& layer = layers_[idx];
      const Matrix& input = trace.activations[idx];
      const Matrix& output = trace.activations[idx + 1];
      if (upstream.rows() != layer.out_dim() || upstream.cols() != input.cols()) {
        throw DimensionError("backward: upstream gradient shape mismatch at layer " +
                             std::to_string(idx));
      }
      Matrix dz = upstream.cwiseProduct(
          DenseLayer<Scalar>::activation_grad_from_output(output, layer.activation));
      grads.weights[idx].noalias() = dz * input.transpose();
      grads.bias[idx] = dz.rowwise().sum();
      upstream.noalias() = layer.weights.transpose() * dz;
    }
    return upstream;
  }

 private:
  std::vector<DenseLayer<Scalar>> layers_;
};

// ---------------------------------------------------------------------------
// Losses.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct VectorLoss {
  Scalar value;
  VectorX<Scalar> grad;  // with respect to the prediction
};

template <typename Scalar>
struct BatchLoss {
  Scalar value;
  MatrixX<Scalar> grad;
};

// Mean of squared element differences; gradient 2 (pred - target) / n.
template <typename Scalar>
VectorLoss<Scalar> mse_loss(const VectorX<Scalar>& pred, const VectorX<Scalar>& target) {
  if (pred.size() != target.size()) {
    throw DimensionError("mse_loss: length mismatch " + std::to_string(pred.size()) + " vs " +
                         std::to_string(target.size()));
  }
  const Scalar n = static_cast<Scalar>(pred.size());
  VectorX<Scalar> diff = pred - target;
  return {diff.squaredNorm() / n, VectorX<Scalar>(Scalar(2) / n * diff)};
}

// Batched MSE, reduced over batch and dimensions.
template <typename Scalar>
BatchLoss<Scalar> mse_loss_batch(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("mse_loss_batch: shape mismatch");
  }
  const Scalar n = static_cast<Scalar>(pred.size());
  MatrixX<Scalar> diff = pred - target;
  return {diff.squaredNorm() / n, MatrixX<Scalar>(Scalar(2) / n * diff)};
}

template <typename Scalar>
struct TripletLossValue {
  Scalar value;
  VectorX<Scalar> grad_anchor;
  VectorX<Scalar> grad_positive;
  VectorX<Scalar> grad_negative;
  bool active;  // hinge engaged
};

// max(d(a,p) - d(a,n) + alpha, 0) with Euclidean d. Subgradient 0 is taken at
// the hinge boundary and wherever a distance is exactly zero.
template <typename Scalar>
TripletLossValue<Scalar> triplet_loss(const VectorX<Scalar>& anchor,
                                      const VectorX<Scalar>& positive,
                                      const VectorX<Scalar>& negative, Scalar alpha) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw DimensionError("triplet_loss: length mismatch");
  }
  if (alpha < Scalar(0)) throw std::invalid_argument("triplet_loss: alpha must be >= 0");
  VectorX<Scalar> ap = anchor - positive;
  VectorX<Scalar> an = anchor - negative;
  const Scalar d_ap = ap.norm();
  const Scalar d_an = an.norm();
  const Scalar raw = d_ap - d_an + alpha;

  TripletLossValue<Scalar> out;
  out.grad_anchor = VectorX<Scalar>::Zero(anchor.size());
  out.grad_positive = VectorX<Scalar>::Zero(anchor.size());
  out.grad_negative = VectorX<Scalar>::Zero(anchor.size());
  out.active = raw > Scalar(0);
  out.value = out.active ? raw : Scalar(0);
  if (out.active) {
    if (d_ap > Scalar(0)) {
      out.grad_anchor += ap / d_ap;
      out.grad_positive = -ap / d_ap;
    }
    if (d_an > Scalar(0)) {
      out.grad_anchor -= an / d_an;
      out.grad_negative = an / d_an;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct AdamConfig {
  Scalar learning_rate;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

// One bias-corrected Adam update on a single tensor. t is the step counter
// AFTER incrementing.
template <typename Scalar, typename ParamT, typename GradT>
void adam_update(ParamT& param, const GradT& grad, ParamT& m, ParamT& v, long t,
                 const AdamConfig<Scalar>& cfg) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw DimensionError("adam_update: gradient shape mismatch");
  }
  const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta1, t));
  const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta2, t));
  m = cfg.beta1 * m + (Scalar(1) - cfg.beta1) * grad;
  v.array() = cfg.beta2 * v.array() + (Scalar(1) - cfg.beta2) * grad.array().square();
  param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

// Optimizer state shaped like an Mlp's parameters, zero-initialized.
template <typename Scalar>
class AdamState {
 public:
  AdamState(const Mlp<Scalar>& model, AdamConfig<Scalar> cfg) : cfg_(cfg) {
    for (const auto& layer : model.layers()) {
      m_w_.push_back(MatrixX<Scalar>::Zero(layer.out_dim(), layer.in_dim()));
      v_w_.push_back(MatrixX<Scalar>::Zero(layer.out_dim(), layer.in_dim()));
      m_b_.push_back(VectorX<Scalar>::Zero(layer.out_dim()));
      v_b_.push_back(VectorX<Scalar>::Zero(layer.out_dim()));
    }
  }

  void step(Mlp<Scalar>& model, const Gradients<Scalar>& grads) {
    if (grads.weights.size() != model.layer_count() || grads.bias.size() != model.layer_count()) {
      throw DimensionError("adam_step: gradient count mismatch");
    }
    ++t_;
    for (std::size_t i = 0; i < model.layer_count(); ++i) {
      auto& layer = model.layers()[i];
      adam_update(layer.weights, grads.weights[i], m_w_[i], v_w_[i], t_, cfg_);
      adam_update(layer.bias, grads.bias[i], m_b_[i], v_b_[i], t_, cfg_);
    }
  }

  long step_count() const { return t_; }
  const AdamConfig<Scalar>& config() const { return cfg_; }

 private:
  AdamConfig<Scalar> cfg_;
  long t_ = 0;
  std::vector<MatrixX<Scalar>> m_w_, v_w_;
  std::vector<VectorX<Scalar>> m_b_, v_b_;
};

// ---------------------------------------------------------------------------
// Gradient checking (always double; single precision cannot resolve the
// requested tolerances).
// ---------------------------------------------------------------------------

struct GradTarget {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

// Central-difference comparison per coordinate; returns the worst relative
// error, |analytic - numeric| / max(|numeric|, 1e-6).
double grad_check(const GradTarget& target, const Eigen::VectorXd& point, double step);

// Same check restricted to max_coords randomly sampled coordinates, for
// functions too large to probe exhaustively.
double grad_check_sampled(const GradTarget& target, const Eigen::VectorXd& point, double step,
                          int max_coords, Rng& rng);

// Training curve shared by the autoencoder and fusion trainers; one loss per
// epoch.
struct TrainReport {
  std::vector<double> epoch_losses;
  int epochs = 0;
  double learning_rate = 0.0;

  double final_loss() const {
    return epoch_losses.empty() ? std::numeric_limits<double>::quiet_NaN() : epoch_losses.back();
  }
};

}  // namespace marblix
