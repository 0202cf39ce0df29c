#include "tasktree/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>

#include "tasktree/common.hpp"
#include "tasktree/pretrain.hpp"
#include "tasktree/rng.hpp"
#include "tasktree/tape.hpp"
#include "tasktree/task_tree.hpp"

namespace tasktree {

std::string EvalReport::line() const {
  return protocol + " " + metric + " " + fmt_g(value) + " " +
         std::to_string(num_tasks) + " " + std::to_string(seed);
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw ValidationError("accuracy: prediction/label count mismatch");
  if (preds.empty()) throw ValidationError("accuracy: empty input");
  int correct = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ValidationError("auc: score/label count mismatch");
  size_t n = scores.size();
  size_t npos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("auc: labels must be 0/1");
    npos += static_cast<size_t>(y);
  }
  size_t nneg = n - npos;
  if (npos == 0 || nneg == 0)
    throw ValidationError("metric undefined: auc needs both classes present");

  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Midranks: members of a tie group all get the group's average 1-based rank.
  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  for (size_t k = 0; k < n; ++k)
    if (labels[k] == 1) pos_rank_sum += rank[k];
  double np = static_cast<double>(npos), nn = static_cast<double>(nneg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace {

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows, 0);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 1; c < m.cols; ++c)
      if (m(r, c) > m(r, out[r])) out[r] = c;  // ties -> lowest index
  return out;
}

Matrix head_logits(const Matrix& emb, const Matrix& w, const Matrix& b) {
  Matrix logits = matmul_nt(emb, w);
  for (int r = 0; r < logits.rows; ++r)
    for (int c = 0; c < logits.cols; ++c) logits(r, c) += b(0, c);
  return logits;
}

std::vector<TaskInstance> tasks_at(const Dataset& d, const std::vector<int>& idx) {
  std::vector<TaskInstance> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(d.tasks[i]);
  return out;
}

double split_accuracy(const EncoderParams& p, const Dataset& d,
                      const std::vector<int>& idx, const Matrix& w,
                      const Matrix& b) {
  Matrix emb = encode_task_trees_projected(p, d.graph, tasks_at(d, idx));
  return accuracy(argmax_rows(head_logits(emb, w, b)), labels_of(d, idx));
}

bool is_graph_task_dataset(const Dataset& d) {
  for (const TaskInstance& t : d.tasks)
    if (t.kind != TaskKind::kGraph) return false;
  return !d.tasks.empty();
}

}  // namespace

FinetuneResult finetune(const EncoderParams& pretrained, const Dataset& data,
                        int epochs, double lr, uint64_t seed, int patience) {
  if (epochs < 0) throw ValidationError("config error: negative epochs");
  const std::vector<int>& train = data.split("train");
  const std::vector<int>& val = data.split("val");
  const std::vector<int>& test = data.split("test");
  if (train.empty() || val.empty() || test.empty())
    throw ValidationError("config error: finetune needs non-empty train/val/test");
  if (data.num_classes < 2)
    throw ValidationError("config error: finetune needs >= 2 classes");
  if (patience < 0) patience = is_graph_task_dataset(data) ? 30 : 200;

  FinetuneResult r;
  r.params = pretrained;
  {
    RngStream head_rng = substream(seed, "head");
    double a = std::sqrt(6.0 / (data.num_classes + pretrained.hidden_dim));
    r.head_w = Matrix::zeros(data.num_classes, pretrained.hidden_dim);
    for (double& v : r.head_w.a) v = (2.0 * head_rng.uniform() - 1.0) * a;
    r.head_b = Matrix::zeros(1, data.num_classes);
  }
  std::vector<int> train_labels = labels_of(data, train);

  EncoderParams best_params = r.params;
  Matrix best_w = r.head_w, best_b = r.head_b;
  double best_val = -1.0;
  int stale = 0;

  std::vector<Matrix*> opt_params = r.params.all();
  opt_params.push_back(&r.head_w);
  opt_params.push_back(&r.head_b);
  AdamState opt_state = AdamState::init(opt_params);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Tape tape;
    ParamNodes pn = register_params(tape, r.params);
    Tape::Id w_id = tape.param(&r.head_w);
    Tape::Id b_id = tape.param(&r.head_b);
    ModelConfig mc;  // exact neighborhoods, no dropout
    Tape::Id nodes = build_encoder(tape, pn, r.params, data.graph, mc);
    auto groups = std::make_shared<Tape::Groups>();
    for (int t : train) groups->push_back(relevant_nodes(data.tasks[t], data.graph));
    Tape::Id emb = build_projector(tape, pn, tape.mean_groups(nodes, groups));
    Tape::Id logits = tape.add_row_broadcast(tape.matmul_nt(emb, w_id), b_id);
    Tape::Id loss = tape.softmax_cross_entropy(logits, train_labels);
    if (!is_finite(tape.value(loss)(0, 0)))
      throw NumericError("finetune: non-finite loss at epoch " + std::to_string(epoch));
    tape.backward(loss);
    GradientSet gs = zero_like(r.params);
    collect_grads(tape, pn, gs);
    Matrix gw = tape.grad(w_id), gb = tape.grad(b_id);
    std::vector<Matrix*> grads = gs.all();
    grads.push_back(&gw);
    grads.push_back(&gb);
    // opt_params still points at r.params' matrices; order matches grads.
    adamw_step(opt_params, grads, lr, 0.0, opt_state);

    double val_acc = split_accuracy(r.params, data, val, r.head_w, r.head_b);
    if (val_acc > best_val) {
      best_val = val_acc;
      best_params = r.params;
      best_w = r.head_w;
      best_b = r.head_b;
      stale = 0;
    } else if (++stale >= patience) {
      break;
    }
  }
  if (best_val >= 0.0) {  // at least one epoch ran
    r.params = std::move(best_params);
    r.head_w = std::move(best_w);
    r.head_b = std::move(best_b);
  }
  r.report.protocol = "finetune";
  r.report.metric = "accuracy";
  r.report.value = split_accuracy(r.params, data, test, r.head_w, r.head_b);
  r.report.num_tasks = static_cast<int>(test.size());
  r.report.seed = seed;
  return r;
}

namespace {

struct EpisodePool {
  std::vector<int> task_idx;            // dataset task indices in the pool
  Matrix emb;                           // projected embeddings, one row each
  std::vector<int> classes;             // ascending distinct labels
  std::map<int, std::vector<int>> by_class;  // label -> pool positions
};

EpisodePool build_pool(const EncoderParams& p, const Dataset& d) {
  EpisodePool pool;
  pool.task_idx = d.split_or_all("test");
  if (pool.task_idx.empty())
    throw ValidationError("config error: empty evaluation pool");
  pool.emb = encode_task_trees_projected(p, d.graph, tasks_at(d, pool.task_idx));
  for (size_t pos = 0; pos < pool.task_idx.size(); ++pos) {
    int label = d.tasks[pool.task_idx[pos]].label;
    pool.by_class[label].push_back(static_cast<int>(pos));
  }
  for (const auto& [label, members] : pool.by_class) pool.classes.push_back(label);
  return pool;
}

int nearest_prototype(const Matrix& protos, const Matrix& emb, int row, bool cosine) {
  int best = 0;
  double best_score = cosine ? -2.0 : 0.0;
  for (int k = 0; k < protos.rows; ++k) {
    double score;
    if (cosine) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (int c = 0; c < protos.cols; ++c) {
        dot += protos(k, c) * emb(row, c);
        na += protos(k, c) * protos(k, c);
        nb += emb(row, c) * emb(row, c);
      }
      score = dot / ((std::sqrt(na) + kNormEps) * (std::sqrt(nb) + kNormEps));
      if (k == 0 || score > best_score) {
        best = k;
        best_score = score;
      }
    } else {
      double d2 = 0.0;
      for (int c = 0; c < protos.cols; ++c) {
        double d = protos(k, c) - emb(row, c);
        d2 += d * d;
      }
      score = d2;
      if (k == 0 || score < best_score) {
        best = k;
        best_score = score;
      }
    }
  }
  return best;
}

constexpr int kQueryCapPerClass = 15;

EvalReport episode_eval(const EncoderParams& p, const Dataset& data,
                        const Matrix* class_vectors, int ways, int shots,
                        int num_episodes, uint64_t seed, bool cosine,
                        const std::string& protocol) {
  if (ways < 1) throw ValidationError("config error: ways must be >= 1");
  if (num_episodes < 1) throw ValidationError("config error: need >= 1 episode");
  if (class_vectors != nullptr && class_vectors->cols != p.hidden_dim)
    throw ValidationError("config error: class vector dim " +
                          std::to_string(class_vectors->cols) +
                          " != embedding dim " + std::to_string(p.hidden_dim));
  if (class_vectors == nullptr && shots < 1)
    throw ValidationError("config error: shots must be >= 1");

  EpisodePool pool = build_pool(p, data);
  if (class_vectors != nullptr)
    for (int label : pool.classes)
      if (label >= class_vectors->rows)
        throw ValidationError("config error: no class vector for label " +
                              std::to_string(label));
  // "The number of ways is set to the number of classes" when fewer classes
  // exist than requested ways.
  int ways_eff = std::min<int>(ways, static_cast<int>(pool.classes.size()));

  long long correct = 0, total = 0;
  for (int ep = 0; ep < num_episodes; ++ep) {
    RngStream rng = substream(seed, "episodes", static_cast<uint64_t>(ep));
    std::vector<int> chosen =
        rng.sample_without_replacement(static_cast<int>(pool.classes.size()), ways_eff);

    Matrix protos = Matrix::zeros(ways_eff, p.hidden_dim);
    std::vector<std::vector<int>> queries(ways_eff);
    for (int k = 0; k < ways_eff; ++k) {
      int label = pool.classes[chosen[k]];
      const std::vector<int>& members = pool.by_class.at(label);
      if (class_vectors == nullptr) {
        if (static_cast<int>(members.size()) < shots + 1)
          throw ValidationError("sampling error: class " + std::to_string(label) +
                                " has " + std::to_string(members.size()) +
                                " instances; need at least shots+1 = " +
                                std::to_string(shots + 1));
        std::vector<int> sup =
            rng.sample_without_replacement(static_cast<int>(members.size()), shots);
        std::vector<char> is_support(members.size(), 0);
        for (int s : sup) {
          is_support[s] = 1;
          for (int c = 0; c < protos.cols; ++c)
            protos(k, c) += pool.emb(members[s], c) / shots;
        }
        for (size_t m = 0; m < members.size(); ++m)
          if (!is_support[m] &&
              static_cast<int>(queries[k].size()) < kQueryCapPerClass)
            queries[k].push_back(members[m]);
      } else {
        for (int c = 0; c < protos.cols; ++c)
          protos(k, c) = (*class_vectors)(label, c);
        for (size_t m = 0; m < members.size(); ++m)
          if (static_cast<int>(queries[k].size()) < kQueryCapPerClass)
            queries[k].push_back(members[m]);
      }
    }
    for (int k = 0; k < ways_eff; ++k)
      for (int q : queries[k]) {
        int pred = nearest_prototype(protos, pool.emb, q, cosine);
        if (pred == k) ++correct;
        ++total;
      }
  }
  if (total == 0)
    throw ValidationError("config error: episodes produced no queries");

  EvalReport r;
  r.protocol = protocol;
  r.metric = "accuracy";
  r.value = static_cast<double>(correct) / static_cast<double>(total);
  r.num_tasks = num_episodes;
  r.seed = seed;
  return r;
}

}  // namespace

EvalReport in_context_eval(const EncoderParams& p, const Dataset& data, int ways,
                           int shots, int num_episodes, uint64_t seed, bool cosine) {
  return episode_eval(p, data, nullptr, ways, shots, num_episodes, seed, cosine,
                      "incontext");
}

EvalReport zero_shot_eval(const EncoderParams& p, const Dataset& data,
                          const Matrix& class_vectors, int num_episodes,
                          int ways, uint64_t seed, bool cosine) {
  return episode_eval(p, data, &class_vectors, ways, /*shots=*/0, num_episodes,
                      seed, cosine, "zeroshot");
}

EvalReport link_prediction_auc(const EncoderParams& p, const Matrix& head_w,
                               const Matrix& head_b, const Dataset& data,
                               uint64_t seed) {
  if (head_w.rows < 2)
    throw ValidationError("config error: link prediction needs a >= 2-class head");
  std::vector<int> pool = data.split_or_all("test");
  std::vector<TaskInstance> pairs;
  for (int t : pool) {
    const TaskInstance& task = data.tasks[t];
    if (task.kind == TaskKind::kEdge && task.label == 1) pairs.push_back(task);
  }
  size_t npos = pairs.size();
  if (npos == 0)
    throw ValidationError("config error: no positive test edges for link prediction");

  // Equal number of uniform non-edges, deduplicated, excluding self-pairs.
  RngStream rng = substream(seed, "negatives");
  std::set<std::pair<int, int>> seen;
  long long attempts = 0;
  const long long max_attempts = 1000LL * static_cast<long long>(npos) + 100000;
  while (pairs.size() < 2 * npos) {
    if (++attempts > max_attempts)
      throw ValidationError("config error: could not sample enough non-edges");
    int u = rng.uniform_int(data.graph.num_nodes);
    int v = rng.uniform_int(data.graph.num_nodes);
    if (u == v) continue;
    auto nb = data.graph.neighbors(u);
    if (std::binary_search(nb.begin(), nb.end(), v)) continue;
    auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second) continue;
    TaskInstance t;
    t.kind = TaskKind::kEdge;
    t.relevant = {u, v};
    t.label = 0;
    pairs.push_back(std::move(t));
  }

  Matrix emb = encode_task_trees_projected(p, data.graph, pairs);
  Matrix logits = head_logits(emb, head_w, head_b);
  std::vector<double> scores;
  std::vector<int> labels;
  for (size_t i = 0; i < pairs.size(); ++i) {
    scores.push_back(logits(static_cast<int>(i), 1) - logits(static_cast<int>(i), 0));
    labels.push_back(pairs[i].label);
  }
  EvalReport r;
  r.protocol = "finetune";
  r.metric = "auc";
  r.value = auc(scores, labels);
  r.num_tasks = static_cast<int>(pairs.size());
  r.seed = seed;
  return r;
}

}  // namespace tasktree
