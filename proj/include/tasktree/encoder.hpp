#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tasktree/graph.hpp"
#include "tasktree/matrix.hpp"
#include "tasktree/rng.hpp"
#include "tasktree/tape.hpp"

namespace tasktree {

enum class Activation : uint8_t { kRelu = 0, kIdentity = 1 };
enum class Mode { kTrain, kEval };

// Message-passing encoder with per-layer transform/aggregate weights, plus a
// linear projector into the task-embedding space and a two-layer prediction
// head.  Weights are stored output-dim x input-dim; all blocks are bias-free.
// With tied_weights a single (w1, w2) pair is shared across layers, which
// requires feature_dim == hidden_dim.
struct EncoderParams {
  int feature_dim = 0;
  int hidden_dim = 0;
  int num_layers = 0;
  Activation activation = Activation::kRelu;
  bool tied_weights = false;
  double dropout_rate = 0.0;

  std::vector<Matrix> w1, w2;  // size num_layers, or 1 when tied
  Matrix projector;            // hidden x hidden
  Matrix head1, head2;         // hidden x hidden

  const Matrix& w1_at(int layer) const { return w1[tied_weights ? 0 : layer]; }
  const Matrix& w2_at(int layer) const { return w2[tied_weights ? 0 : layer]; }
  std::vector<Matrix*> all();              // optimizer-ordered parameter list
  std::vector<const Matrix*> all() const;
};

// Glorot-uniform initialization; every matrix gets its own named substream of
// the root seed so the result is reproducible regardless of call order.
EncoderParams init_params(int feature_dim, int hidden_dim, int num_layers,
                          uint64_t seed, Activation activation = Activation::kRelu,
                          double dropout_rate = 0.15, bool tied_weights = false);

// Exact-neighborhood, dropout-free forward pass: returns num_nodes x hidden.
Matrix forward(const Graph& g, const EncoderParams& p);
// Task-embedding projection z * projector^T.
Matrix project(const EncoderParams& p, const Matrix& z);
// Prediction head act(z * head1^T) * head2^T (no final activation).
Matrix head_g(const EncoderParams& p, const Matrix& z);

// ---------------------------------------------------------------------------
// Tape-side construction for training.

struct ParamNodes {
  std::vector<Tape::Id> w1, w2;
  Tape::Id projector = -1, head1 = -1, head2 = -1;
};
ParamNodes register_params(Tape& t, EncoderParams& p);

struct ModelConfig {
  Mode mode = Mode::kEval;
  int fanout = -1;                  // < 0 -> full neighborhoods
  RngStream* dropout_rng = nullptr; // consumed only in train mode
  RngStream* sample_rng = nullptr;  // consumed only when fanout >= 0
};

// Builds the layered forward on the tape; returns the id of the final
// num_nodes x hidden embedding node.  The graph must outlive the tape.
Tape::Id build_encoder(Tape& t, const ParamNodes& pn, const EncoderParams& p,
                       const Graph& g, const ModelConfig& cfg);
Tape::Id build_projector(Tape& t, const ParamNodes& pn, Tape::Id z);
Tape::Id build_head(Tape& t, const ParamNodes& pn, const EncoderParams& p,
                    Tape::Id z);

// Gradients in the same order/shape as EncoderParams::all().
struct GradientSet {
  std::vector<Matrix> w1, w2;
  Matrix projector, head1, head2;
  std::vector<Matrix*> all();
};
GradientSet zero_like(const EncoderParams& p);
// Accumulates tape adjoints of the registered parameter nodes into gs.
void collect_grads(const Tape& t, const ParamNodes& pn, GradientSet& gs);

// ---------------------------------------------------------------------------
// Checkpoint IO: versioned binary header + row-major float64 payload.
void save_checkpoint(const EncoderParams& p, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace tasktree
