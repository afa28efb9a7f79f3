#pragma once

#include "marblix/monogram.hpp"
#include "marblix/nn.hpp"

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace marblix {

// M[i][j] = u[i] * v[j]. Latents are paired, so mismatched lengths are a bug.
template <typename Scalar>
MatrixX<Scalar> outer_product(const VectorX<Scalar>& u, const VectorX<Scalar>& v) {
  if (u.size() != v.size()) throw DimensionError("outer_product: length mismatch");
  return u * v.transpose();
}

template <typename Scalar>
VectorX<Scalar> flatten_row_major(const MatrixX<Scalar>& m) {
  VectorX<Scalar> flat(m.size());
  Index k = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) flat[k++] = m(i, j);
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Fusion network Q: the outer product of (u, v) is flattened row-major and
// passed through a tanh trunk 16384 -> 1024 -> 256 -> 64. The triplet
// branches share this single parameter set.
// ---------------------------------------------------------------------------

template <typename Scalar>
class FusionNetwork {
 public:
  Mlp<Scalar> trunk;
  Index latent_dim = 0;

  static FusionNetwork make(Rng& rng, Index latent_dim = 128) {
    FusionNetwork q;
    q.latent_dim = latent_dim;
    q.trunk.add_layer(latent_dim * latent_dim, 1024, Activation::Tanh);
    q.trunk.add_layer(1024, 256, Activation::Tanh);
    q.trunk.add_layer(256, kCodeBits, Activation::Tanh);
    q.trunk.init(rng);
    return q;
  }

  static FusionNetwork from_net(Mlp<Scalar> net) {
    FusionNetwork q;
    const Index in = net.in_dim();
    const Index side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(in))));
    if (side * side != in || net.out_dim() != kCodeBits) {
      throw DimensionError("fusion checkpoint has the wrong architecture");
    }
    q.latent_dim = side;
    q.trunk = std::move(net);
    return q;
  }

  // Flattened outer products, one column per case. A column reinterpreted as
  // a latent_dim x latent_dim column-major matrix must equal v u^T, which is
  // exactly the row-major flattening of u v^T.
  MatrixX<Scalar> fusion_inputs(const MatrixX<Scalar>& u_columns,
                                const MatrixX<Scalar>& v_columns) const {
    check_latents(u_columns, v_columns);
    MatrixX<Scalar> x(latent_dim * latent_dim, u_columns.cols());
    for (Index k = 0; k < u_columns.cols(); ++k) {
      Eigen::Map<MatrixX<Scalar>> view(x.col(k).data(), latent_dim, latent_dim);
      view.noalias() = v_columns.col(k) * u_columns.col(k).transpose();
    }
    return x;
  }

  VectorX<Scalar> code(const VectorX<Scalar>& u, const VectorX<Scalar>& v) const {
    MatrixX<Scalar> c = code_batch(MatrixX<Scalar>(u), MatrixX<Scalar>(v));
    return VectorX<Scalar>(c.col(0));
  }

  MatrixX<Scalar> code_batch(const MatrixX<Scalar>& u_columns,
                             const MatrixX<Scalar>& v_columns) const {
    return trunk.forward(fusion_inputs(u_columns, v_columns));
  }

 private:
  void check_latents(const MatrixX<Scalar>& u_columns, const MatrixX<Scalar>& v_columns) const {
    if (u_columns.rows() != latent_dim || v_columns.rows() != latent_dim) {
      throw DimensionError("fusion: latents must have length " + std::to_string(latent_dim));
    }
    if (u_columns.cols() != v_columns.cols()) {
      throw DimensionError("fusion: u and v case counts differ");
    }
    if (!u_columns.allFinite() || !v_columns.allFinite()) {
      throw std::invalid_argument("fusion: non-finite latent");
    }
  }
};

template <typename Scalar>
Monogram generate_monogram(const FusionNetwork<Scalar>& q, const VectorX<Scalar>& u,
                           const VectorX<Scalar>& v, double threshold = 0.0) {
  Monogram m;
  m.real_code = q.code(u, v).template cast<Real>();
  m.bits = binarize(m.real_code, threshold);
  return m;
}

// ---------------------------------------------------------------------------
// Hard-triplet mining: for every anchor, the farthest same-label case and the
// closest different-label case under Euclidean distance, ties broken by the
// lowest case index. Cases whose class has a single member are skipped as
// anchors.
// ---------------------------------------------------------------------------

struct Triplet {
  Index anchor;
  Index positive;
  Index negative;
};

template <typename Scalar>
std::vector<Triplet> mine_triplets(const MatrixX<Scalar>& point_columns,
                                   const std::vector<std::string>& labels) {
  const Index n = point_columns.cols();
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionError("mine_triplets: label count mismatch");
  }
  std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw TrainingError("mine_triplets: need at least 2 classes, got " +
                        std::to_string(distinct.size()));
  }

  std::set<std::string> warned;
  std::vector<Triplet> triplets;
  for (Index a = 0; a < n; ++a) {
    Index best_pos = -1, best_neg = -1;
    Scalar pos_dist = Scalar(0), neg_dist = Scalar(0);
    for (Index j = 0; j < n; ++j) {
      if (j == a) continue;
      const Scalar d = (point_columns.col(a) - point_columns.col(j)).squaredNorm();
      if (labels[j] == labels[a]) {
        if (best_pos < 0 || d > pos_dist) {
          best_pos = j;
          pos_dist = d;
        }
      } else {
        if (best_neg < 0 || d < neg_dist) {
          best_neg = j;
          neg_dist = d;
        }
      }
    }
    if (best_pos < 0) {
      if (warned.insert(labels[a]).second) {
        log_warn("mine_triplets: class '" + labels[a] +
                 "' has a single member; skipped as anchor");
      }
      continue;
    }
    triplets.push_back({a, best_pos, best_neg});
  }
  return triplets;
}

// ---------------------------------------------------------------------------
// Triplet training of Q. Triplets are re-mined at the start of every epoch
// from the current real codes (or from concatenated latents when
// mine_on_latents is set); the loss itself is always computed on real codes
// because thresholding has no gradient.
// ---------------------------------------------------------------------------

struct FusionHyper {
  int epochs = 150;
  double learning_rate = 1e-5;
  double alpha = 1.0;  // triplet margin
  int batch = 32;      // triplets per Adam step
  double threshold = 0.0;
  bool mine_on_latents = false;
};

template <typename Scalar>
std::pair<FusionNetwork<Scalar>, TrainReport> train_fusion(FusionNetwork<Scalar> q,
                                                           const MatrixX<Scalar>& u_columns,
                                                           const MatrixX<Scalar>& v_columns,
                                                           const std::vector<std::string>& labels,
                                                           const FusionHyper& hyper,
                                                           std::uint64_t seed) {
  const Index n = u_columns.cols();
  if (n == 0) throw std::invalid_argument("train_fusion: no latent pairs");
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionError("train_fusion: label count mismatch");
  }
  if (hyper.alpha < 0.0) throw std::invalid_argument("train_fusion: alpha must be >= 0");
  if (hyper.batch < 1) throw std::invalid_argument("train_fusion: batch must be >= 1");

  const MatrixX<Scalar> inputs = q.fusion_inputs(u_columns, v_columns);
  MatrixX<Scalar> latent_concat;
  if (hyper.mine_on_latents) {
    latent_concat.resize(u_columns.rows() + v_columns.rows(), n);
    latent_concat.topRows(u_columns.rows()) = u_columns;
    latent_concat.bottomRows(v_columns.rows()) = v_columns;
  }

  AdamConfig<Scalar> adam_cfg{static_cast<Scalar>(hyper.learning_rate)};
  AdamState<Scalar> adam(q.trunk, adam_cfg);
  TrainReport report;
  report.epochs = hyper.epochs;
  report.learning_rate = hyper.learning_rate;

  Rng rng(seed);
  typename Mlp<Scalar>::Trace trace;
  Gradients<Scalar> grads;
  double initial_loss = 0.0;
  const Scalar alpha = static_cast<Scalar>(hyper.alpha);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    MatrixX<Scalar> codes = q.trunk.forward(inputs);
    std::vector<Triplet> triplets =
        hyper.mine_on_latents ? mine_triplets(latent_concat, labels) : mine_triplets(codes, labels);
    if (triplets.empty()) {
      throw TrainingError("train_fusion: no valid triplets at epoch " + std::to_string(epoch));
    }
    rng.shuffle(triplets);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < triplets.size(); start += hyper.batch) {
      const Index batch =
          static_cast<Index>(std::min<std::size_t>(hyper.batch, triplets.size() - start));
      MatrixX<Scalar> x(inputs.rows(), 3 * batch);
      for (Index t = 0; t < batch; ++t) {
        const Triplet& trip = triplets[start + static_cast<std::size_t>(t)];
        x.col(t) = inputs.col(trip.anchor);
        x.col(batch + t) = inputs.col(trip.positive);
        x.col(2 * batch + t) = inputs.col(trip.negative);
      }
      MatrixX<Scalar> c = q.trunk.forward_trace(x, trace);
      MatrixX<Scalar> dc = MatrixX<Scalar>::Zero(c.rows(), c.cols());
      const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(batch);
      for (Index t = 0; t < batch; ++t) {
        TripletLossValue<Scalar> loss = triplet_loss<Scalar>(c.col(t), c.col(batch + t),
                                                             c.col(2 * batch + t), alpha);
        loss_sum += static_cast<double>(loss.value);
        dc.col(t) = loss.grad_anchor * inv_batch;
        dc.col(batch + t) = loss.grad_positive * inv_batch;
        dc.col(2 * batch + t) = loss.grad_negative * inv_batch;
      }
      q.trunk.backward(trace, dc, grads);
      adam.step(q.trunk, grads);
    }

    const double epoch_loss = loss_sum / static_cast<double>(triplets.size());
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("train_fusion: non-finite loss at epoch " + std::to_string(epoch));
    }
    if (epoch == 1) {
      initial_loss = epoch_loss;
    } else if (initial_loss > 0.0 && epoch_loss > 1e3 * initial_loss) {
      throw TrainingError("train_fusion: diverged at epoch " + std::to_string(epoch) + " (loss " +
                          std::to_string(epoch_loss) + ")");
    }
    report.epoch_losses.push_back(epoch_loss);
  }
  return {std::move(q), std::move(report)};
}

}  // namespace marblix
