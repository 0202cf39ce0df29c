#pragma once

#include <cstdint>
#include <vector>

#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"
#include "tasktree/graph.hpp"
#include "tasktree/rng.hpp"

namespace tasktree {

struct CorruptionConfig {
  double edge_drop_rate = 0.2;
  double feature_mask_rate = 0.2;
};

struct PretrainConfig {
  int epochs = 10;
  int batch_size = 4096;
  double learning_rate = 1e-7;
  double weight_decay = 1e-8;
  double lambda = 10.0;  // domain-regularizer weight
  int fanout = 10;
  uint64_t seed = 0;
  // Encoder shape (the full-scale default is hidden 768, 2 layers; example
  // configs override these for desk-scale runs).
  int hidden_dim = 768;
  int num_layers = 2;
  double dropout_rate = 0.15;
  Activation activation = Activation::kRelu;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double total = 0.0;  // recon + lambda * kl
};

// Independently drops each undirected edge (both directions together) with
// edge_drop_rate and zeroes each feature row with feature_mask_rate.  Draw
// order is edges in CSR order, then rows in index order.
Graph corrupt(const Graph& g, const CorruptionConfig& cfg, RngStream& rng);

// Symmetric normalized reconstruction value:
//   (1/2n) sum_i [ ||rho(g(zh_i)) - rho(zt_i)||^2 + ||rho(g(zt_i)) - rho(zh_i)||^2 ]
// (the stop-gradient on the targets only matters for gradients, not the value).
double reconstruction_loss(const EncoderParams& p, const Matrix& z_hat,
                           const Matrix& z_tilde);

// (1/|B|) sum_i KL(H || softmax(z_i)) with H = softmax(mean row); the lambda
// weight is applied by the caller.
double domain_regularizer(const Matrix& batch_z);

// Decoupled-weight-decay Adam over an arbitrary parameter list.
struct AdamState {
  int64_t t = 0;
  std::vector<Matrix> m, v;
  static AdamState init(const std::vector<Matrix*>& params);
};
void adamw_step(const std::vector<Matrix*>& params,
                const std::vector<Matrix*>& grads, double lr,
                double weight_decay, AdamState& state);

struct PretrainResult {
  EncoderParams params;
  std::vector<LossBreakdown> log;  // one entry per epoch (batch means)
};

// Two-view self-supervised pretraining over the union of all datasets' tasks.
// Deterministic given cfg.seed; epoch 0 returns the initial parameters.
PretrainResult pretrain(const std::vector<Dataset>& datasets,
                        const PretrainConfig& cfg,
                        const CorruptionConfig& corruption);

}  // namespace tasktree
