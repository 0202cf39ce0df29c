#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"

namespace tasktree {

struct EvalReport {
  std::string protocol;  // finetune | incontext | zeroshot
  std::string metric;    // accuracy | auc
  double value = 0.0;
  int num_tasks = 0;
  uint64_t seed = 0;
  std::string line() const;  // "protocol metric value num_tasks seed"
};

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);
// Mann-Whitney AUC with midrank tie handling; labels must contain both 0 and 1.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Joint training of encoder + linear head with cross-entropy on the train
// split, early stopping on validation accuracy (best snapshot kept), report
// on the test split.  patience < 0 picks the kind-based default: 200 for
// node/edge datasets, 30 for graph-task datasets.
struct FinetuneResult {
  EncoderParams params;
  Matrix head_w;  // num_classes x hidden
  Matrix head_b;  // 1 x num_classes
  EvalReport report;
};
FinetuneResult finetune(const EncoderParams& pretrained, const Dataset& data,
                        int epochs, double lr, uint64_t seed, int patience = -1);

// k-shot episodes: per episode sample `ways` classes (clamped to the classes
// present in the evaluation pool), `shots` support instances per class,
// prototypes = support means, queries classified by nearest prototype.
// Euclidean distance by default; cosine behind the flag.
EvalReport in_context_eval(const EncoderParams& p, const Dataset& data, int ways,
                           int shots, int num_episodes, uint64_t seed,
                           bool cosine = false);

// Identical episode machinery with prototypes taken from class_vectors rows;
// no support instances are drawn.
EvalReport zero_shot_eval(const EncoderParams& p, const Dataset& data,
                          const Matrix& class_vectors, int num_episodes,
                          int ways, uint64_t seed, bool cosine = false);

// Link prediction: positive test edges plus an equal number of uniformly
// sampled non-edges, scored by the finetuned head's class-1 logit margin.
EvalReport link_prediction_auc(const EncoderParams& p, const Matrix& head_w,
                               const Matrix& head_b, const Dataset& data,
                               uint64_t seed);

}  // namespace tasktree
