#include "tasktree/synth.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "tasktree/common.hpp"
#include "tasktree/encoder.hpp"
#include "tasktree/rng.hpp"

namespace tasktree {

namespace {

void validate(const SynthParams& p) {
  if (p.feature_dim < 2) throw ValidationError("config error: feature_dim must be >= 2");
  if (p.a_num_classes < 2 || p.a_num_classes > p.feature_dim)
    throw ValidationError("config error: a_num_classes must be in [2, feature_dim]");
  if (p.a_num_nodes < 4 * p.a_num_classes)
    throw ValidationError("config error: a_num_nodes too small for stratified splits");
  if (p.a_separation < 0.0) throw ValidationError("config error: a_separation must be >= 0");
  for (double q : {p.a_intra_edge_prob, p.a_inter_edge_prob})
    if (q < 0.0 || q > 1.0)
      throw ValidationError("config error: edge probabilities must be in [0, 1]");
  if (p.b_num_graphs < 8)
    throw ValidationError("config error: b_num_graphs too small for stratified splits");
  if (p.b_min_nodes < 4 || p.b_max_nodes < p.b_min_nodes)
    throw ValidationError("config error: domain B node range must satisfy 4 <= min <= max");
  if (p.b_feature_noise < 0.0)
    throw ValidationError("config error: b_feature_noise must be >= 0");
  if (p.hidden_dim < 1 || p.num_layers < 1)
    throw ValidationError("config error: reference encoder dims must be >= 1");
}

// Stratified 50/25/25 split of task indices by label, shuffled per class.
std::map<std::string, std::vector<int>> stratified_splits(
    const std::vector<int>& labels, int num_classes, RngStream& rng) {
  std::map<std::string, std::vector<int>> out;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> members;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(static_cast<int>(i));
    if (members.size() < 4)
      throw ValidationError("config error: class " + std::to_string(c) +
                            " has fewer than 4 tasks");
    rng.shuffle(members);
    size_t n_train = members.size() / 2;
    size_t n_val = members.size() / 4;
    out["train"].insert(out["train"].end(), members.begin(), members.begin() + n_train);
    out["val"].insert(out["val"].end(), members.begin() + n_train,
                      members.begin() + n_train + n_val);
    out["test"].insert(out["test"].end(), members.begin() + n_train + n_val,
                       members.end());
  }
  for (auto& [name, idx] : out) std::sort(idx.begin(), idx.end());
  return out;
}

// Per-class centroids of the train-split task embeddings under a frozen
// reference encoder keyed off the "classvec" substream.  These rows serve as
// zero-shot class vectors and as instruction targets.
Matrix frozen_class_centroids(const Dataset& d, const SynthParams& p, uint64_t seed) {
  EncoderParams enc = init_params(p.feature_dim, p.hidden_dim, p.num_layers,
                                  derive_seed(seed, "classvec"),
                                  Activation::kRelu, /*dropout_rate=*/0.0);
  const std::vector<int>& train = d.split("train");
  std::vector<TaskInstance> train_tasks;
  train_tasks.reserve(train.size());
  for (int i : train) train_tasks.push_back(d.tasks[i]);
  Matrix emb = encode_task_trees_projected(enc, d.graph, train_tasks);

  Matrix centroids = Matrix::zeros(d.num_classes, p.hidden_dim);
  std::vector<int> counts(d.num_classes, 0);
  for (size_t i = 0; i < train_tasks.size(); ++i) ++counts[train_tasks[i].label];
  for (int c = 0; c < d.num_classes; ++c)
    if (counts[c] == 0)
      throw ValidationError("config error: class " + std::to_string(c) +
                            " has no train tasks for centroid");
  for (size_t i = 0; i < train_tasks.size(); ++i) {
    int c = train_tasks[i].label;
    for (int j = 0; j < p.hidden_dim; ++j)
      centroids(c, j) += emb(static_cast<int>(i), j) / counts[c];
  }
  return centroids;
}

}  // namespace

Dataset make_domain_a(const SynthParams& p, uint64_t seed) {
  validate(p);
  RngStream rng = substream(seed, "synth-a");

  int n = p.a_num_nodes;
  int k = p.a_num_classes;
  int block = (n + k - 1) / k;
  std::vector<int> cls(n);
  for (int i = 0; i < n; ++i) cls[i] = std::min(k - 1, i / block);

  // Class c mean = separation * e_c; unit-variance Gaussian noise per dim.
  Matrix feats = Matrix::zeros(n, p.feature_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p.feature_dim; ++j)
      feats(i, j) = (j == cls[i] ? p.a_separation : 0.0) + rng.normal();

  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      double prob = cls[u] == cls[v] ? p.a_intra_edge_prob : p.a_inter_edge_prob;
      if (rng.uniform() < prob) edges.emplace_back(u, v);
    }

  Dataset d;
  d.name = "domain_a";
  d.graph = build_graph(n, edges, std::move(feats));
  d.num_classes = k;
  d.tasks.reserve(n);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    TaskInstance t;
    t.kind = TaskKind::kNode;
    t.relevant = {i};
    t.label = cls[i];
    d.tasks.push_back(std::move(t));
    labels[i] = cls[i];
  }
  d.splits = stratified_splits(labels, k, rng);
  d.class_vectors = frozen_class_centroids(d, p, seed);
  return d;
}

Dataset make_domain_b(const SynthParams& p, uint64_t seed) {
  validate(p);
  RngStream rng = substream(seed, "synth-b");

  std::vector<Graph> parts;
  std::vector<int> labels;
  parts.reserve(p.b_num_graphs);
  for (int g = 0; g < p.b_num_graphs; ++g) {
    int label = g % 2;
    int n = p.b_min_nodes + static_cast<int>(rng.uniform_int(p.b_max_nodes - p.b_min_nodes + 1));
    std::vector<std::pair<int, int>> edges;
    if (label == 0) {
      // Triangle-rich: ring plus distance-2 chords; every node has degree 4
      // and sits on two triangles.
      for (int i = 0; i < n; ++i) {
        edges.emplace_back(i, (i + 1) % n);
        edges.emplace_back(i, (i + 2) % n);
      }
    } else {
      // Star: hub 0 joined to every leaf; triangle-free.
      for (int i = 1; i < n; ++i) edges.emplace_back(0, i);
    }
    std::vector<int> deg(n, 0);
    for (auto [u, v] : edges) {
      if (u != v) {
        ++deg[u];
        ++deg[v];
      }
    }
    // Chord duplicates at tiny n collapse in build_graph; recompute degrees
    // from the deduplicated structure instead of the raw list.
    Matrix feats = Matrix::zeros(n, p.feature_dim);
    Graph shape = build_graph(n, edges, Matrix::zeros(n, p.feature_dim));
    int max_deg = 1;
    for (int i = 0; i < n; ++i) max_deg = std::max(max_deg, shape.degree(i));
    for (int i = 0; i < n; ++i) {
      feats(i, 0) = static_cast<double>(shape.degree(i)) / max_deg;
      feats(i, 1) = 1.0;
      for (int j = 2; j < p.feature_dim; ++j)
        feats(i, j) = p.b_feature_noise * rng.normal();
    }
    parts.push_back(build_graph(n, edges, std::move(feats)));
    labels.push_back(label);
  }

  Dataset d;
  d.name = "domain_b";
  d.graph = disjoint_union(parts);
  d.num_classes = 2;
  d.tasks.reserve(parts.size());
  int offset = 0;
  for (size_t g = 0; g < parts.size(); ++g) {
    TaskInstance t;
    t.kind = TaskKind::kGraph;
    t.component = static_cast<int>(g);
    t.relevant.resize(parts[g].num_nodes);
    std::iota(t.relevant.begin(), t.relevant.end(), offset);
    t.label = labels[g];
    offset += parts[g].num_nodes;
    d.tasks.push_back(std::move(t));
  }
  d.splits = stratified_splits(labels, 2, rng);
  d.class_vectors = frozen_class_centroids(d, p, seed);
  return d;
}

void synth(const SynthParams& p, uint64_t seed, const std::string& out_dir) {
  save_dataset(make_domain_a(p, seed), out_dir + "/domain_a");
  save_dataset(make_domain_b(p, seed), out_dir + "/domain_b");
}

}  // namespace tasktree
