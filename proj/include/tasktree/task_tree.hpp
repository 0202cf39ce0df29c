#pragma once

#include <string>
#include <vector>

#include "tasktree/encoder.hpp"
#include "tasktree/graph.hpp"
#include "tasktree/matrix.hpp"

namespace tasktree {

enum class TaskKind { kNode, kEdge, kGraph };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

// One prediction instance.  For node tasks `relevant` holds the node, for
// edge tasks the two endpoints (negative links allowed: the pair need not be
// an edge), for graph tasks all nodes of `component`.
struct TaskInstance {
  TaskKind kind = TaskKind::kNode;
  std::vector<int> relevant;
  int label = -1;      // class index, or 0/1 for link tasks
  int component = -1;  // graph tasks only
};

// Canonical task-relevant node list, validated against g.
std::vector<int> relevant_nodes(const TaskInstance& task, const Graph& g);

// Base graph plus one virtual node per task, each connected by a star to its
// task-relevant nodes.  Virtual nodes never connect to each other; the base
// adjacency is unchanged.  Virtual feature rows are the mean of the relevant
// rows (convention only -- the canonical embedding path never reads them).
struct AugmentedGraph {
  Graph graph;
  int virtual_offset = 0;            // == base num_nodes
  std::vector<int> task_of_virtual;  // virtual k -> task index
};
AugmentedGraph augment_with_task_nodes(const Graph& g,
                                       const std::vector<TaskInstance>& tasks);

// Task-tree embeddings: row k = mean over relevant nodes of the encoder
// output on the un-augmented graph (pre-projector).
Matrix encode_task_trees(const EncoderParams& p, const Graph& g,
                         const std::vector<TaskInstance>& tasks);
// Same rows, passed through the projector.
Matrix encode_task_trees_projected(const EncoderParams& p, const Graph& g,
                                   const std::vector<TaskInstance>& tasks);
// Cross-check oracle: encode base nodes, then apply one plain mean-
// aggregation step (no weights, no activation) at each virtual node of the
// augmented graph.  Agrees with encode_task_trees by construction.
Matrix encode_task_trees_via_augmentation(const EncoderParams& p, const Graph& g,
                                          const std::vector<TaskInstance>& tasks);

// Level-wise mean-aggregated features x^(l), l = 0..L-1; x^(0) = raw
// features, isolated nodes are zero from level 1 on.
struct SubtreeInfo {
  int depth = 0;
  std::vector<Matrix> levels;
};
SubtreeInfo subtree_info(const Graph& g, int depth);

// Induced subgraph on every node within `hops` of any root, ids remapped
// densely in ascending original order.  When kept_nodes is non-null it
// receives the original ids in that order (so new id of original v is its
// index in *kept_nodes).
Graph extract_ego_subgraph(const Graph& g, const std::vector<int>& roots, int hops,
                           std::vector<int>* kept_nodes = nullptr);

}  // namespace tasktree
