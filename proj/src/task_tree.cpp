#include "tasktree/task_tree.hpp"

#include <algorithm>
#include <deque>

#include "tasktree/common.hpp"

namespace tasktree {

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kNode: return "node";
    case TaskKind::kEdge: return "edge";
    case TaskKind::kGraph: return "graph";
  }
  throw ValidationError("unknown task kind");
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "node") return TaskKind::kNode;
  if (s == "edge") return TaskKind::kEdge;
  if (s == "graph") return TaskKind::kGraph;
  throw ValidationError("format error: unknown task kind '" + s + "'");
}

std::vector<int> relevant_nodes(const TaskInstance& task, const Graph& g) {
  for (int v : task.relevant)
    if (v < 0 || v >= g.num_nodes)
      throw ValidationError("malformed task: node " + std::to_string(v) +
                            " outside [0, " + std::to_string(g.num_nodes) + ")");
  switch (task.kind) {
    case TaskKind::kNode:
      if (task.relevant.size() != 1)
        throw ValidationError("malformed task: node task needs exactly one node");
      return task.relevant;
    case TaskKind::kEdge:
      if (task.relevant.size() != 2)
        throw ValidationError("malformed task: edge task needs exactly two nodes");
      return task.relevant;
    case TaskKind::kGraph: {
      // All nodes of the task's component; single-graph datasets treat the
      // whole graph as component 0.
      std::vector<int> out;
      if (g.graph_id_of_node.empty()) {
        if (task.component > 0)
          throw ValidationError("malformed task: component " +
                                std::to_string(task.component) +
                                " on a single-graph dataset");
        out.reserve(g.num_nodes);
        for (int i = 0; i < g.num_nodes; ++i) out.push_back(i);
      } else {
        if (task.component < 0 || task.component >= g.num_components())
          throw ValidationError("malformed task: component " +
                                std::to_string(task.component) + " outside [0, " +
                                std::to_string(g.num_components()) + ")");
        for (int i = 0; i < g.num_nodes; ++i)
          if (g.graph_id_of_node[i] == task.component) out.push_back(i);
      }
      if (out.empty()) throw ValidationError("malformed task: empty component");
      return out;
    }
  }
  throw ValidationError("malformed task: unknown kind");
}

AugmentedGraph augment_with_task_nodes(const Graph& g,
                                       const std::vector<TaskInstance>& tasks) {
  int n = g.num_nodes;
  int total = n + static_cast<int>(tasks.size());
  Matrix features = Matrix::zeros(total, g.feature_dim());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g.feature_dim(); ++j) features(i, j) = g.features(i, j);

  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.targets.size() / 2 + tasks.size() * 2);
  for (int u = 0; u < n; ++u)
    for (int32_t v : g.neighbors(u))
      if (u <= v) edges.emplace_back(u, v);

  AugmentedGraph out;
  out.virtual_offset = n;
  for (size_t k = 0; k < tasks.size(); ++k) {
    std::vector<int> rel = relevant_nodes(tasks[k], g);
    int vid = n + static_cast<int>(k);
    for (int r : rel) {
      edges.emplace_back(vid, r);
      for (int j = 0; j < g.feature_dim(); ++j)
        features(vid, j) += g.features(r, j) / static_cast<double>(rel.size());
    }
    out.task_of_virtual.push_back(static_cast<int>(k));
  }
  out.graph = build_graph(total, edges, std::move(features));
  return out;
}

namespace {

Matrix mean_over_groups(const Matrix& z, const std::vector<std::vector<int>>& groups) {
  Matrix out = Matrix::zeros(static_cast<int>(groups.size()), z.cols);
  for (size_t k = 0; k < groups.size(); ++k) {
    double inv = 1.0 / static_cast<double>(groups[k].size());
    for (int i : groups[k])
      for (int c = 0; c < z.cols; ++c)
        out(static_cast<int>(k), c) += z(i, c) * inv;
  }
  return out;
}

}  // namespace

Matrix encode_task_trees(const EncoderParams& p, const Graph& g,
                         const std::vector<TaskInstance>& tasks) {
  std::vector<std::vector<int>> groups;
  groups.reserve(tasks.size());
  for (const TaskInstance& t : tasks) groups.push_back(relevant_nodes(t, g));
  Matrix z = forward(g, p);
  return mean_over_groups(z, groups);
}

Matrix encode_task_trees_projected(const EncoderParams& p, const Graph& g,
                                   const std::vector<TaskInstance>& tasks) {
  return project(p, encode_task_trees(p, g, tasks));
}

Matrix encode_task_trees_via_augmentation(const EncoderParams& p, const Graph& g,
                                          const std::vector<TaskInstance>& tasks) {
  AugmentedGraph aug = augment_with_task_nodes(g, tasks);
  Matrix z = forward(g, p);
  Matrix out = Matrix::zeros(static_cast<int>(tasks.size()), p.hidden_dim);
  for (size_t k = 0; k < tasks.size(); ++k) {
    int vid = aug.virtual_offset + static_cast<int>(k);
    auto nb = aug.graph.neighbors(vid);
    double inv = 1.0 / static_cast<double>(nb.size());
    for (int32_t r : nb)
      for (int c = 0; c < z.cols; ++c) out(static_cast<int>(k), c) += z(r, c) * inv;
  }
  return out;
}

SubtreeInfo subtree_info(const Graph& g, int depth) {
  if (depth < 1) throw ValidationError("subtree_info: depth must be >= 1");
  SubtreeInfo info;
  info.depth = depth;
  info.levels.push_back(g.features);
  for (int l = 1; l < depth; ++l)
    info.levels.push_back(neighbor_mean(g, info.levels.back()));
  return info;
}

Graph extract_ego_subgraph(const Graph& g, const std::vector<int>& roots, int hops,
                           std::vector<int>* kept_nodes) {
  if (hops < 1) throw ValidationError("extract_ego_subgraph: hops must be >= 1");
  if (roots.empty()) throw ValidationError("extract_ego_subgraph: no roots");
  std::vector<int> dist(g.num_nodes, -1);
  std::deque<int> queue;
  for (int r : roots) {
    if (r < 0 || r >= g.num_nodes)
      throw ValidationError("extract_ego_subgraph: root out of range");
    if (dist[r] == -1) {
      dist[r] = 0;
      queue.push_back(r);
    }
  }
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    if (dist[u] == hops) continue;
    for (int32_t v : g.neighbors(u))
      if (dist[v] == -1) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }
  std::vector<int> keep;
  for (int i = 0; i < g.num_nodes; ++i)
    if (dist[i] >= 0) keep.push_back(i);
  std::vector<int> remap(g.num_nodes, -1);
  for (size_t i = 0; i < keep.size(); ++i) remap[keep[i]] = static_cast<int>(i);
  if (kept_nodes) *kept_nodes = keep;

  Matrix features = Matrix::zeros(static_cast<int>(keep.size()), g.feature_dim());
  for (size_t i = 0; i < keep.size(); ++i)
    for (int j = 0; j < g.feature_dim(); ++j)
      features(static_cast<int>(i), j) = g.features(keep[i], j);
  std::vector<std::pair<int, int>> edges;
  for (int u : keep)
    for (int32_t v : g.neighbors(u))
      if (remap[v] >= 0 && u <= v) edges.emplace_back(remap[u], remap[v]);
  return build_graph(static_cast<int>(keep.size()), edges, std::move(features));
}

}  // namespace tasktree
