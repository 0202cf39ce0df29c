#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tasktree/matrix.hpp"
#include "tasktree/rng.hpp"

namespace tasktree {

// Immutable undirected graph in CSR form with a dense feature matrix.
// Neighbor lists are sorted and deduplicated; adjacency is symmetric.
// graph_id_of_node is populated only for multi-graph (disjoint-union) data.
struct Graph {
  int num_nodes = 0;
  std::vector<int64_t> offsets;   // num_nodes + 1, nondecreasing
  std::vector<int32_t> targets;   // offsets.back() entries
  Matrix features;                // num_nodes x d
  std::vector<int32_t> graph_id_of_node;  // empty for single-graph data

  int degree(int v) const { return static_cast<int>(offsets[v + 1] - offsets[v]); }
  std::span<const int32_t> neighbors(int v) const {
    return {targets.data() + offsets[v], static_cast<size_t>(degree(v))};
  }
  int feature_dim() const { return features.cols; }
  int num_components() const;  // 1 when graph_id_of_node is empty
};

struct FeatureStats {
  double max_row_norm = 0.0;       // B_x: exact max over rows of the L2 norm
  std::vector<double> mean, stdev; // per-dimension statistics
};

// Symmetrizes, sorts, and dedups the edge list; validates indices and
// feature finiteness.  Self-loops are preserved as given.
Graph build_graph(int num_nodes, const std::vector<std::pair<int, int>>& edges,
                  Matrix features, std::vector<int32_t> graph_id_of_node = {});

// Text loaders/savers.  Edge file rows are "u v"; feature file row i holds
// the whitespace-separated features of node i.  Node count comes from the
// feature file.
Graph load_graph(const std::string& edge_path, const std::string& feature_path);
void save_graph(const Graph& g, const std::string& edge_path,
                const std::string& feature_path);

FeatureStats feature_stats(const Graph& g);

// Each nonzero feature row scaled to unit norm; zero rows unchanged.
Graph row_normalize(const Graph& g);

// All neighbors when deg <= fanout, otherwise a uniform sample without
// replacement of size fanout (ascending ids).  Isolated node -> empty.
std::vector<int> neighbor_sample(const Graph& g, int node, int fanout, RngStream& rng);

// Top-k left singular directions scaled by singular values (U_k * Sigma_k).
// The sign of each singular vector is fixed by making its largest-magnitude
// entry positive so results are deterministic.
Matrix svd_project(const Matrix& features, int target_dim);

// Node indices offset per component; graph_id_of_node populated; no
// cross-component edges.  Requires equal feature dims.
Graph disjoint_union(const std::vector<Graph>& graphs);

// Row i = mean over N(i) of X rows (zero for isolated nodes).  The shared
// aggregation kernel behind the encoder and the subtree levels.
Matrix neighbor_mean(const Graph& g, const Matrix& x);

}  // namespace tasktree
