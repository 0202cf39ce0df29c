#pragma once

#include <cstdint>
#include <vector>

#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"

namespace tasktree {

struct SFTConfig {
  int epochs = 30;
  double learning_rate = 1e-3;
  int batch_size = 64;
  uint64_t seed = 0;
};

// Instruction-tuning loss: (1/n) sum_i ||emb_i - instructions[label_i]||^2,
// where emb_i is the projected task-tree embedding under the current params.
double sft_loss(const EncoderParams& p, const Graph& g,
                const std::vector<TaskInstance>& tasks,
                const Matrix& instructions);

struct SpecializeResult {
  EncoderParams params;
  std::vector<double> log;  // per-epoch mean training loss
};

// Full-parameter instruction tuning on the dataset's train split against its
// class vectors.  The input params are copied; the caller's model is never
// modified.  Deterministic given cfg.seed.
SpecializeResult specialize(const EncoderParams& pretrained, const Dataset& dataset,
                            const SFTConfig& cfg);

}  // namespace tasktree
