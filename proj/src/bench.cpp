#include "tasktree/bench.hpp"

#include <algorithm>
#include <chrono>
#include <utility>

#include "tasktree/common.hpp"
#include "tasktree/task_tree.hpp"

namespace tasktree {

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Both pipelines call this with a freshly re-derived stream, so they see the
// same batch at the same rep (fairness contract).
std::vector<TaskInstance> draw_batch(const Dataset& d, int batch_size, RngStream& rng) {
  int n = static_cast<int>(d.tasks.size());
  std::vector<int> idx = rng.sample_without_replacement(n, std::min(batch_size, n));
  std::vector<TaskInstance> batch;
  batch.reserve(idx.size());
  for (int i : idx) batch.push_back(d.tasks[i]);
  return batch;
}

}  // namespace

BenchReport run_bench(const Dataset& d, const EncoderParams& p, const BenchConfig& cfg) {
  if (cfg.reps < 1) throw ValidationError("config error: bench reps must be >= 1");
  if (cfg.batch_size < 1) throw ValidationError("config error: bench batch_size must be >= 1");
  if (cfg.hops < 1) throw ValidationError("config error: bench hops must be >= 1");
  if (d.tasks.empty()) throw ValidationError("config error: bench dataset has no tasks");
  if (d.graph.feature_dim() != p.feature_dim)
    throw ValidationError("dimension error: bench encoder feature dim mismatch");

  std::vector<double> tree_sample, tree_extract, tree_encode, tree_total;
  std::vector<double> sub_sample, sub_extract, sub_encode, sub_total;
  double sink = 0.0;  // keeps intermediate results observable

  for (int rep = 0; rep < cfg.reps; ++rep) {
    // --- task-tree pipeline -------------------------------------------------
    {
      RngStream rng = substream(cfg.seed, "bench", static_cast<uint64_t>(rep));
      double t0 = now_ms();
      std::vector<TaskInstance> batch = draw_batch(d, cfg.batch_size, rng);
      double t1 = now_ms();
      AugmentedGraph aug = augment_with_task_nodes(d.graph, batch);
      sink += aug.graph.num_nodes;
      double t2 = now_ms();
      Matrix emb = encode_task_trees(p, d.graph, batch);
      sink += emb(0, 0);
      double t3 = now_ms();
      tree_sample.push_back(t1 - t0);
      tree_extract.push_back(t2 - t1);
      tree_encode.push_back(t3 - t2);
      tree_total.push_back(t3 - t0);
    }
    // --- ego-subgraph pipeline ----------------------------------------------
    {
      RngStream rng = substream(cfg.seed, "bench", static_cast<uint64_t>(rep));
      double t0 = now_ms();
      std::vector<TaskInstance> batch = draw_batch(d, cfg.batch_size, rng);
      double t1 = now_ms();
      std::vector<Graph> subs;
      std::vector<std::vector<int>> sub_roots;
      subs.reserve(batch.size());
      sub_roots.reserve(batch.size());
      for (const TaskInstance& task : batch) {
        std::vector<int> roots = relevant_nodes(task, d.graph);
        std::vector<int> kept;
        subs.push_back(extract_ego_subgraph(d.graph, roots, cfg.hops, &kept));
        std::vector<int> remapped;
        remapped.reserve(roots.size());
        for (int r : roots) {
          auto it = std::lower_bound(kept.begin(), kept.end(), r);
          remapped.push_back(static_cast<int>(it - kept.begin()));
        }
        sub_roots.push_back(std::move(remapped));
      }
      double t2 = now_ms();
      for (size_t i = 0; i < subs.size(); ++i) {
        Matrix z = forward(subs[i], p);
        double acc = 0.0;
        for (int r : sub_roots[i])
          for (int c = 0; c < z.cols; ++c) acc += z(r, c);
        sink += acc / sub_roots[i].size();
      }
      double t3 = now_ms();
      sub_sample.push_back(t1 - t0);
      sub_extract.push_back(t2 - t1);
      sub_encode.push_back(t3 - t2);
      sub_total.push_back(t3 - t0);
    }
  }

  BenchReport r;
  r.reps = cfg.reps;
  r.batch_size = cfg.batch_size;
  r.hops = cfg.hops;
  r.tree = {median(tree_sample), median(tree_extract), median(tree_encode),
            median(tree_total)};
  r.subgraph = {median(sub_sample), median(sub_extract), median(sub_encode),
                median(sub_total)};
  if (!is_finite(sink)) throw NumericError("bench: non-finite embeddings");
  return r;
}

std::string BenchReport::lines() const {
  auto row = [](const std::string& pipeline, const std::string& phase, double ms) {
    return pipeline + " " + phase + " " + fmt_g(ms) + "\n";
  };
  std::string s = "reps " + std::to_string(reps) + " batch " +
                  std::to_string(batch_size) + " hops " + std::to_string(hops) + "\n";
  s += row("tree", "sampling", tree.sampling_ms);
  s += row("tree", "extraction", tree.extraction_ms);
  s += row("tree", "encoding", tree.encoding_ms);
  s += row("tree", "total", tree.total_ms);
  s += row("subgraph", "sampling", subgraph.sampling_ms);
  s += row("subgraph", "extraction", subgraph.extraction_ms);
  s += row("subgraph", "encoding", subgraph.encoding_ms);
  s += row("subgraph", "total", subgraph.total_ms);
  return s;
}

Dataset make_bench_dataset(int num_nodes, int num_tasks, int feature_dim,
                           uint64_t seed) {
  if (num_nodes < 2 || num_tasks < 1 || feature_dim < 1)
    throw ValidationError("config error: bench dataset dims must be positive");
  RngStream rng = substream(seed, "bench-data");

  Matrix feats = Matrix::zeros(num_nodes, feature_dim);
  for (int i = 0; i < num_nodes; ++i)
    for (int j = 0; j < feature_dim; ++j) feats(i, j) = rng.normal();

  // Sparse random graph with mean degree ~10.
  double prob = std::min(1.0, 10.0 / num_nodes);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < num_nodes; ++u)
    for (int v = u + 1; v < num_nodes; ++v)
      if (rng.uniform() < prob) edges.emplace_back(u, v);

  Dataset d;
  d.name = "bench";
  d.graph = build_graph(num_nodes, edges, std::move(feats));
  d.num_classes = 2;
  std::vector<int> ids =
      rng.sample_without_replacement(num_nodes, std::min(num_tasks, num_nodes));
  d.tasks.reserve(ids.size());
  for (int id : ids) {
    TaskInstance t;
    t.kind = TaskKind::kNode;
    t.relevant = {id};
    t.label = id % 2;
    d.tasks.push_back(std::move(t));
  }
  return d;
}

}  // namespace tasktree
