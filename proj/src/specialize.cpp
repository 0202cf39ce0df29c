#include "tasktree/specialize.hpp"

#include <algorithm>
#include <memory>

#include "tasktree/common.hpp"
#include "tasktree/pretrain.hpp"
#include "tasktree/rng.hpp"
#include "tasktree/tape.hpp"
#include "tasktree/task_tree.hpp"

namespace tasktree {

double sft_loss(const EncoderParams& p, const Graph& g,
                const std::vector<TaskInstance>& tasks,
                const Matrix& instructions) {
  if (tasks.empty()) throw ValidationError("sft_loss: empty task batch");
  if (instructions.cols != p.hidden_dim)
    throw ValidationError("config error: instruction dim " +
                          std::to_string(instructions.cols) + " != embedding dim " +
                          std::to_string(p.hidden_dim));
  for (const TaskInstance& t : tasks)
    if (t.label < 0 || t.label >= instructions.rows)
      throw ValidationError("config error: no instruction row for label " +
                            std::to_string(t.label));
  Matrix emb = encode_task_trees_projected(p, g, tasks);
  double total = 0.0;
  for (size_t i = 0; i < tasks.size(); ++i)
    for (int c = 0; c < emb.cols; ++c) {
      double d = emb(static_cast<int>(i), c) - instructions(tasks[i].label, c);
      total += d * d;
    }
  return total / static_cast<double>(tasks.size());
}

SpecializeResult specialize(const EncoderParams& pretrained, const Dataset& dataset,
                            const SFTConfig& cfg) {
  if (!dataset.has_class_vectors())
    throw ValidationError("config error: dataset '" + dataset.name +
                          "' has no class vectors for instruction tuning");
  if (cfg.epochs < 0) throw ValidationError("config error: negative epochs");
  if (cfg.batch_size < 1) throw ValidationError("config error: batch_size must be >= 1");

  SpecializeResult result;
  result.params = pretrained;
  std::vector<int> train = dataset.split_or_all("train");
  if (train.empty()) throw ValidationError("config error: empty SFT train split");
  for (int t : train)
    if (dataset.tasks[t].label < 0 ||
        dataset.tasks[t].label >= dataset.class_vectors.rows)
      throw ValidationError("config error: no instruction row for label " +
                            std::to_string(dataset.tasks[t].label));

  AdamState opt_state = AdamState::init(result.params.all());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = train;
    RngStream batch_rng = substream(cfg.seed, "batch", static_cast<uint64_t>(epoch));
    batch_rng.shuffle(order);

    double epoch_loss = 0.0;
    int num_batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t stop = std::min(order.size(), start + cfg.batch_size);

      Tape tape;
      ParamNodes pn = register_params(tape, result.params);
      ModelConfig mc;  // eval-mode forward: exact neighborhoods, no dropout
      Tape::Id nodes = build_encoder(tape, pn, result.params, dataset.graph, mc);

      auto groups = std::make_shared<Tape::Groups>();
      Matrix targets = Matrix::zeros(static_cast<int>(stop - start),
                                     result.params.hidden_dim);
      for (size_t i = start; i < stop; ++i) {
        const TaskInstance& t = dataset.tasks[order[i]];
        groups->push_back(relevant_nodes(t, dataset.graph));
        for (int c = 0; c < targets.cols; ++c)
          targets(static_cast<int>(i - start), c) = dataset.class_vectors(t.label, c);
      }
      Tape::Id emb = build_projector(tape, pn, tape.mean_groups(nodes, groups));
      Tape::Id loss = tape.sq_diff_sum(emb, tape.constant(std::move(targets)),
                                       1.0 / static_cast<double>(stop - start));
      double value = tape.value(loss)(0, 0);
      if (!is_finite(value))
        throw NumericError("specialize: non-finite SFT loss at epoch " +
                           std::to_string(epoch));
      tape.backward(loss);
      GradientSet gs = zero_like(result.params);
      collect_grads(tape, pn, gs);
      // Full-parameter update; decay 0 keeps AdamW a pure adaptive step.
      adamw_step(result.params.all(), gs.all(), cfg.learning_rate, 0.0, opt_state);

      epoch_loss += value;
      ++num_batches;
    }
    result.log.push_back(epoch_loss / num_batches);
  }
  return result;
}

}  // namespace tasktree
