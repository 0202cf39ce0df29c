#pragma once

#include <cstdint>
#include <string>

#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"
#include "tasktree/graph.hpp"
#include "tasktree/pretrain.hpp"
#include "tasktree/task_tree.hpp"

namespace tasktree {

// Stability-bound verification.  delta is the exact distance between the two
// task-tree embeddings, where each root's embedding is the depth-L tree
// unrolling with the activation applied once at the root:
//   phi_i = sigma( sum_{l=0..L-1} W2^l W1 x_i^(l) ),
// x^(l) being the level-wise neighbor means of the raw features.  For the
// identity activation this is exactly the tree-recursive encoder; for ReLU it
// is the 1-Lipschitz-at-the-root form the bound's algebra actually controls.
// The chain delta <= pairwise_bound <= global_bound then holds for any
// 1-Lipschitz activation with sigma(0) = 0.
struct StabilityReport {
  double delta = 0.0;
  double pairwise_bound = 0.0;  // (1/nm) sum_ij sum_l C1 C2^l ||x_i^(l) - x_j^(l)||
  double global_bound = 0.0;    // 2 Bx C1 (C2^L - 1)/(C2 - 1), limit 2 Bx C1 L at C2=1
  double c_sigma = 1.0;
  double b_w1 = 0.0, b_w2 = 0.0, b_x = 0.0;
  int depth = 0;

  bool chain_ok() const;      // the inequality chain, with float-rounding slack
  std::string lines() const;  // labeled text report
};

StabilityReport stability_check(const Graph& g1, const TaskInstance& task1,
                                const Graph& g2, const TaskInstance& task2,
                                const EncoderParams& params, int depth);

// Transfer probe: signed risk gaps between two encoders under exact
// least-squares heads (ridge 1e-8).  lhs compares downstream squared-loss
// risk against one-hot labels; rhs compares linear-reconstruction risk from
// corrupted to clean embeddings.  A better pretraining fit predicting a
// better downstream fit shows up as lhs and rhs sharing a sign.
// ratio = lhs / sqrt(rhs) when rhs > 0, otherwise NaN (the proportionality
// constant relating the two gaps is not estimable from one pair).
struct TransferProbeReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  std::string lines() const;
};

TransferProbeReport transfer_probe(const EncoderParams& phi_a,
                                   const EncoderParams& phi_b,
                                   const Dataset& pretrain_data,
                                   const Dataset& downstream_data,
                                   uint64_t seed = 0,
                                   const CorruptionConfig& corruption = {});

// First-moment proxy for the distance between two task distributions:
// L2 distance between the mean projected task-tree embeddings of the
// two samples.
struct DistributionGapReport {
  double gap = 0.0;
  std::string lines() const;
};

DistributionGapReport distribution_gap(const EncoderParams& phi,
                                       const Dataset& data_p,
                                       const Dataset& data_t);

}  // namespace tasktree
