#include "tasktree/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "tasktree/common.hpp"
#include "tasktree/tape.hpp"
#include "tasktree/task_tree.hpp"

namespace tasktree {

Graph corrupt(const Graph& g, const CorruptionConfig& cfg, RngStream& rng) {
  if (cfg.edge_drop_rate < 0.0 || cfg.edge_drop_rate > 1.0 ||
      cfg.feature_mask_rate < 0.0 || cfg.feature_mask_rate > 1.0)
    throw ValidationError("corrupt: rates must lie in [0, 1]");

  std::vector<std::pair<int, int>> kept;
  for (int u = 0; u < g.num_nodes; ++u)
    for (int32_t v : g.neighbors(u)) {
      if (u > v) continue;  // one draw per undirected edge
      if (rng.uniform() < cfg.edge_drop_rate) continue;
      kept.emplace_back(u, static_cast<int>(v));
    }
  Matrix features = g.features;
  for (int i = 0; i < g.num_nodes; ++i)
    if (rng.uniform() < cfg.feature_mask_rate)
      for (int j = 0; j < features.cols; ++j) features(i, j) = 0.0;
  return build_graph(g.num_nodes, kept, std::move(features), g.graph_id_of_node);
}

double reconstruction_loss(const EncoderParams& p, const Matrix& z_hat,
                           const Matrix& z_tilde) {
  if (!z_hat.same_shape(z_tilde))
    throw ValidationError("dimension error: reconstruction_loss shape mismatch");
  if (z_hat.rows < 1) throw ValidationError("reconstruction_loss: empty batch");
  Matrix ph = row_normalize_eps(head_g(p, z_hat));
  Matrix pt = row_normalize_eps(head_g(p, z_tilde));
  Matrix nh = row_normalize_eps(z_hat);
  Matrix nt = row_normalize_eps(z_tilde);
  double total = 0.0;
  for (int i = 0; i < z_hat.rows; ++i)
    for (int c = 0; c < z_hat.cols; ++c) {
      double d1 = ph(i, c) - nt(i, c);
      double d2 = pt(i, c) - nh(i, c);
      total += d1 * d1 + d2 * d2;
    }
  return total / (2.0 * z_hat.rows);
}

double domain_regularizer(const Matrix& batch_z) {
  if (batch_z.rows < 1) throw ValidationError("domain_regularizer: empty batch");
  Matrix meanrow = Matrix::zeros(1, batch_z.cols);
  for (int i = 0; i < batch_z.rows; ++i)
    for (int j = 0; j < batch_z.cols; ++j)
      meanrow(0, j) += batch_z(i, j) / batch_z.rows;
  Matrix h = softmax_rows(meanrow);
  Matrix sm = softmax_rows(batch_z);
  double total = 0.0;
  for (int i = 0; i < batch_z.rows; ++i)
    for (int j = 0; j < batch_z.cols; ++j)
      total += h(0, j) * (std::log(h(0, j)) - std::log(sm(i, j)));
  return total / batch_z.rows;
}

AdamState AdamState::init(const std::vector<Matrix*>& params) {
  AdamState s;
  for (const Matrix* p : params) {
    s.m.push_back(Matrix::zeros(p->rows, p->cols));
    s.v.push_back(Matrix::zeros(p->rows, p->cols));
  }
  return s;
}

void adamw_step(const std::vector<Matrix*>& params,
                const std::vector<Matrix*>& grads, double lr,
                double weight_decay, AdamState& state) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ValidationError("adamw_step: parameter/gradient/state count mismatch");
  state.t += 1;
  double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));
  for (size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    if (!p.same_shape(g))
      throw ValidationError("adamw_step: gradient shape mismatch");
    if (!all_finite(g))
      throw NumericError("adamw_step: non-finite gradient in parameter " +
                         std::to_string(k));
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    for (size_t i = 0; i < p.a.size(); ++i) {
      m.a[i] = kBeta1 * m.a[i] + (1.0 - kBeta1) * g.a[i];
      v.a[i] = kBeta2 * v.a[i] + (1.0 - kBeta2) * g.a[i] * g.a[i];
      double mhat = m.a[i] / bc1;
      double vhat = v.a[i] / bc2;
      p.a[i] = p.a[i] * (1.0 - lr * weight_decay) -
               lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

namespace {

// Per-batch training step: two corrupted views per dataset, task-tree
// embeddings through the encoder + projector, symmetric reconstruction with
// stop-gradient targets plus the KL regularizer over both views.
LossBreakdown pretrain_step(EncoderParams& params,
                            const std::vector<Dataset>& datasets,
                            const std::vector<std::pair<int, int>>& batch,
                            const PretrainConfig& cfg,
                            const CorruptionConfig& corruption,
                            RngStream& corruption_rng, RngStream& dropout_rng,
                            RngStream& sample_rng, AdamState& opt_state) {
  // Group the batch's tasks by dataset, preserving dataset order.
  std::vector<std::vector<int>> by_dataset(datasets.size());
  for (auto [d, t] : batch) by_dataset[d].push_back(t);

  Tape tape;
  ParamNodes pn = register_params(tape, params);
  ModelConfig mc;
  mc.mode = Mode::kTrain;
  mc.fanout = cfg.fanout;
  mc.dropout_rng = &dropout_rng;
  mc.sample_rng = &sample_rng;

  // Corrupted views must stay alive until backward() (mean_neighbors is not
  // used in train mode, but groups reference node indices of these graphs).
  std::vector<Graph> views;
  views.reserve(datasets.size() * 2);

  Tape::Id zh_all = -1, zt_all = -1;
  int total_tasks = 0;
  for (size_t d = 0; d < datasets.size(); ++d) {
    if (by_dataset[d].empty()) continue;
    const Dataset& ds = datasets[d];
    auto groups = std::make_shared<Tape::Groups>();
    for (int t : by_dataset[d])
      groups->push_back(relevant_nodes(ds.tasks[t], ds.graph));
    total_tasks += static_cast<int>(groups->size());

    Tape::Id per_view[2];
    for (int view = 0; view < 2; ++view) {
      views.push_back(corrupt(ds.graph, corruption, corruption_rng));
      Tape::Id nodes = build_encoder(tape, pn, params, views.back(), mc);
      Tape::Id task_emb = tape.mean_groups(nodes, groups);
      per_view[view] = build_projector(tape, pn, task_emb);
    }
    zh_all = zh_all < 0 ? per_view[0] : tape.concat_rows(zh_all, per_view[0]);
    zt_all = zt_all < 0 ? per_view[1] : tape.concat_rows(zt_all, per_view[1]);
  }
  if (total_tasks == 0) throw ValidationError("config error: empty batch");

  Tape::Id pred_h = tape.row_normalize(build_head(tape, pn, params, zh_all));
  Tape::Id pred_t = tape.row_normalize(build_head(tape, pn, params, zt_all));
  Tape::Id targ_h = tape.stop_grad(tape.row_normalize(zh_all));
  Tape::Id targ_t = tape.stop_grad(tape.row_normalize(zt_all));
  Tape::Id recon = tape.scale(
      tape.add(tape.sq_diff_sum(pred_h, targ_t, 1.0),
               tape.sq_diff_sum(pred_t, targ_h, 1.0)),
      1.0 / (2.0 * total_tasks));
  Tape::Id kl = tape.softmax_kl_mean(tape.concat_rows(zh_all, zt_all));
  Tape::Id total = tape.add(recon, tape.scale(kl, cfg.lambda));

  LossBreakdown lb;
  lb.recon = tape.value(recon)(0, 0);
  lb.kl = tape.value(kl)(0, 0);
  lb.total = tape.value(total)(0, 0);
  if (!is_finite(lb.total))
    throw NumericError("pretrain: non-finite loss (recon=" + fmt_g(lb.recon) +
                       ", kl=" + fmt_g(lb.kl) + ")");

  tape.backward(total);
  GradientSet gs = zero_like(params);
  collect_grads(tape, pn, gs);
  adamw_step(params.all(), gs.all(), cfg.learning_rate, cfg.weight_decay,
             opt_state);
  return lb;
}

}  // namespace

PretrainResult pretrain(const std::vector<Dataset>& datasets,
                        const PretrainConfig& cfg,
                        const CorruptionConfig& corruption) {
  if (datasets.empty()) throw ValidationError("config error: pretrain needs >= 1 dataset");
  if (cfg.epochs < 0) throw ValidationError("config error: negative epochs");
  if (cfg.batch_size < 1) throw ValidationError("config error: batch_size must be >= 1");
  if (cfg.lambda < 0.0) throw ValidationError("config error: lambda must be >= 0");
  int feature_dim = datasets.front().graph.feature_dim();
  for (const Dataset& d : datasets)
    if (d.graph.feature_dim() != feature_dim)
      throw ValidationError("config error: datasets disagree on feature dim");

  PretrainResult result;
  result.params = init_params(feature_dim, cfg.hidden_dim, cfg.num_layers,
                              cfg.seed, cfg.activation, cfg.dropout_rate);

  std::vector<std::pair<int, int>> all_tasks;  // (dataset, task)
  for (size_t d = 0; d < datasets.size(); ++d)
    for (size_t t = 0; t < datasets[d].tasks.size(); ++t)
      all_tasks.emplace_back(static_cast<int>(d), static_cast<int>(t));
  if (all_tasks.empty()) throw ValidationError("config error: no tasks to pretrain on");

  AdamState opt_state = AdamState::init(result.params.all());
  RngStream corruption_rng = substream(cfg.seed, "corruption");
  RngStream dropout_rng = substream(cfg.seed, "dropout");
  RngStream sample_rng = substream(cfg.seed, "sampling");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::pair<int, int>> order = all_tasks;
    RngStream batch_rng = substream(cfg.seed, "batch", static_cast<uint64_t>(epoch));
    batch_rng.shuffle(order);

    LossBreakdown epoch_mean;
    int num_batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::pair<int, int>> batch(order.begin() + start,
                                             order.begin() + stop);
      LossBreakdown lb =
          pretrain_step(result.params, datasets, batch, cfg, corruption,
                        corruption_rng, dropout_rng, sample_rng, opt_state);
      epoch_mean.recon += lb.recon;
      epoch_mean.kl += lb.kl;
      epoch_mean.total += lb.total;
      ++num_batches;
    }
    epoch_mean.recon /= num_batches;
    epoch_mean.kl /= num_batches;
    epoch_mean.total /= num_batches;
    result.log.push_back(epoch_mean);
  }
  return result;
}

}  // namespace tasktree
