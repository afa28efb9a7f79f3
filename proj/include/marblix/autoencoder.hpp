#pragma once

#include "marblix/nn.hpp"

#include <string>
#include <utility>
#include <vector>

namespace marblix {

inline constexpr Index kBottleneckDim = 128;
inline constexpr std::size_t kEncoderLayers = 3;

// A_I takes an image embedding and reconstructs the sequence embedding;
// A_S the reverse.
enum class AeDirection { ImageToSeq, SeqToImage };

const char* direction_name(AeDirection d);

template <typename Scalar>
Scalar cosine_similarity(const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return std::numeric_limits<Scalar>::quiet_NaN();
  return a.dot(b) / (na * nb);
}

// ---------------------------------------------------------------------------
// Hybrid cross-modal autoencoder: encoder 512/256, bottleneck 128, decoder
// 256/512, linear output sized to the reconstructed modality. ReLU on all
// hidden layers; the output stays linear because targets are embeddings with
// no fixed range.
// ---------------------------------------------------------------------------

template <typename Scalar>
class HybridAutoencoder {
 public:
  AeDirection direction;
  Mlp<Scalar> net;

  static HybridAutoencoder make(AeDirection dir, Index in_dim, Index out_dim, Rng& rng) {
    HybridAutoencoder ae;
    ae.direction = dir;
    ae.net.add_layer(in_dim, 512, Activation::ReLU);
    ae.net.add_layer(512, 256, Activation::ReLU);
    ae.net.add_layer(256, kBottleneckDim, Activation::ReLU);
    ae.net.add_layer(kBottleneckDim, 256, Activation::ReLU);
    ae.net.add_layer(256, 512, Activation::ReLU);
    ae.net.add_layer(512, out_dim, Activation::Linear);
    ae.net.init(rng);
    return ae;
  }

  static HybridAutoencoder from_net(AeDirection dir, Mlp<Scalar> net) {
    HybridAutoencoder ae;
    ae.direction = dir;
    ae.net = std::move(net);
    if (ae.net.layer_count() != 6 || ae.net.layers()[2].out_dim() != kBottleneckDim) {
      throw DimensionError("hybrid autoencoder checkpoint has the wrong architecture");
    }
    return ae;
  }

  // Bottleneck activation: the first three layers of the full pass.
  VectorX<Scalar> encode(const VectorX<Scalar>& x) const {
    return net.forward_prefix(x, kEncoderLayers);
  }
  MatrixX<Scalar> encode(const MatrixX<Scalar>& x) const {
    return net.forward_prefix(x, kEncoderLayers);
  }

  VectorX<Scalar> reconstruct(const VectorX<Scalar>& x) const { return net.forward(x); }
  MatrixX<Scalar> reconstruct(const MatrixX<Scalar>& x) const { return net.forward(x); }
};

// u = E_I(f): image-enriched latent of length 128.
template <typename Scalar>
VectorX<Scalar> encode_image_latent(const HybridAutoencoder<Scalar>& model,
                                    const VectorX<Scalar>& f) {
  if (model.direction != AeDirection::ImageToSeq) {
    throw std::invalid_argument("encode_image_latent: model direction is not ImageToSeq");
  }
  return model.encode(f);
}

// v = E_S(g): sequence-enriched latent of length 128.
template <typename Scalar>
VectorX<Scalar> encode_seq_latent(const HybridAutoencoder<Scalar>& model,
                                  const VectorX<Scalar>& g) {
  if (model.direction != AeDirection::SeqToImage) {
    throw std::invalid_argument("encode_seq_latent: model direction is not SeqToImage");
  }
  return model.encode(g);
}

struct AeHyper {
  int epochs;
  double learning_rate;
};

// Quoted training settings for each direction.
inline constexpr AeHyper kImageToSeqDefaults{150, 1e-5};
inline constexpr AeHyper kSeqToImageDefaults{50, 1e-4};

inline AeHyper default_ae_hyper(AeDirection dir) {
  return dir == AeDirection::ImageToSeq ? kImageToSeqDefaults : kSeqToImageDefaults;
}

// Full-batch Adam on MSE. f_columns / g_columns hold one (already min-max
// scaled) case per column; the direction picks which side is input and which
// is the reconstruction target. Aborts when the loss goes non-finite or
// exceeds 1e3 x the first epoch's loss.
template <typename Scalar>
std::pair<HybridAutoencoder<Scalar>, TrainReport> train_hybrid(AeDirection direction,
                                                               const MatrixX<Scalar>& f_columns,
                                                               const MatrixX<Scalar>& g_columns,
                                                               const AeHyper& hyper,
                                                               std::uint64_t seed) {
  if (f_columns.cols() == 0 || g_columns.cols() == 0) {
    throw std::invalid_argument("train_hybrid: empty training pairs");
  }
  if (f_columns.cols() != g_columns.cols()) {
    throw DimensionError("train_hybrid: f and g case counts differ");
  }
  const bool image_to_seq = direction == AeDirection::ImageToSeq;
  const MatrixX<Scalar>& inputs = image_to_seq ? f_columns : g_columns;
  const MatrixX<Scalar>& targets = image_to_seq ? g_columns : f_columns;

  Rng rng(seed);
  HybridAutoencoder<Scalar> model =
      HybridAutoencoder<Scalar>::make(direction, inputs.rows(), targets.rows(), rng);

  AdamConfig<Scalar> adam_cfg{static_cast<Scalar>(hyper.learning_rate)};
  AdamState<Scalar> adam(model.net, adam_cfg);
  TrainReport report;
  report.epochs = hyper.epochs;
  report.learning_rate = hyper.learning_rate;

  typename Mlp<Scalar>::Trace trace;
  Gradients<Scalar> grads;
  double initial_loss = 0.0;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    MatrixX<Scalar> pred = model.net.forward_trace(inputs, trace);
    BatchLoss<Scalar> loss = mse_loss_batch(pred, targets);
    const double loss_value = static_cast<double>(loss.value);
    if (!std::isfinite(loss_value)) {
      throw TrainingError("train_hybrid(" + std::string(direction_name(direction)) +
                          "): non-finite loss at epoch " + std::to_string(epoch));
    }
    if (epoch == 1) {
      initial_loss = loss_value;
    } else if (initial_loss > 0.0 && loss_value > 1e3 * initial_loss) {
      throw TrainingError("train_hybrid(" + std::string(direction_name(direction)) +
                          "): diverged at epoch " + std::to_string(epoch) + " (loss " +
                          std::to_string(loss_value) + ")");
    }
    model.net.backward(trace, loss.grad, grads);
    adam.step(model.net, grads);
    report.epoch_losses.push_back(loss_value);
  }
  return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Reconstruction quality on held-out pairs: cosine(g, A_I(f)) rows are tagged
// with the reconstructed modality "sequence", cosine(f, A_S(g)) with "image".
// ---------------------------------------------------------------------------

struct ReconstructionRow {
  std::string case_id;
  std::string modality;  // reconstructed modality
  double cosine;
  double mse;
  bool degenerate;  // zero-norm vector met; cosine undefined
};

struct ReconstructionReport {
  std::vector<ReconstructionRow> rows;
  double median_cosine_image = 0.0;
  double median_cosine_sequence = 0.0;
  double mean_mse_image = 0.0;
  double mean_mse_sequence = 0.0;
};

ReconstructionReport reconstruction_report(const HybridAutoencoder<Real>& image_to_seq,
                                           const HybridAutoencoder<Real>& seq_to_image,
                                           const MatrixXr& f_columns, const MatrixXr& g_columns,
                                           const std::vector<std::string>& case_ids);

}  // namespace marblix
