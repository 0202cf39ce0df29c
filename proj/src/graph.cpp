#include "tasktree/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tasktree/common.hpp"

namespace tasktree {

int Graph::num_components() const {
  if (graph_id_of_node.empty()) return num_nodes > 0 ? 1 : 0;
  int32_t m = -1;
  for (int32_t gid : graph_id_of_node) m = std::max(m, gid);
  return static_cast<int>(m) + 1;
}

Graph build_graph(int num_nodes, const std::vector<std::pair<int, int>>& edges,
                  Matrix features, std::vector<int32_t> graph_id_of_node) {
  if (num_nodes < 0) throw ValidationError("build_graph: negative node count");
  if (features.rows != num_nodes)
    throw ValidationError("build_graph: feature rows (" + std::to_string(features.rows) +
                          ") != num_nodes (" + std::to_string(num_nodes) + ")");
  if (!all_finite(features))
    throw ValidationError("build_graph: non-finite feature value");
  if (!graph_id_of_node.empty() &&
      static_cast<int>(graph_id_of_node.size()) != num_nodes)
    throw ValidationError("build_graph: graph_id_of_node size mismatch");

  // Symmetrize, then sort+dedup per node via one global sort.
  std::vector<std::pair<int, int>> dir;
  dir.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw ValidationError("build_graph: edge endpoint out of range: (" +
                            std::to_string(u) + ", " + std::to_string(v) + ")");
    dir.emplace_back(u, v);
    if (u != v) dir.emplace_back(v, u);
  }
  std::sort(dir.begin(), dir.end());
  dir.erase(std::unique(dir.begin(), dir.end()), dir.end());

  Graph g;
  g.num_nodes = num_nodes;
  g.features = std::move(features);
  g.graph_id_of_node = std::move(graph_id_of_node);
  g.offsets.assign(num_nodes + 1, 0);
  for (auto& [u, v] : dir) g.offsets[u + 1]++;
  for (int i = 0; i < num_nodes; ++i) g.offsets[i + 1] += g.offsets[i];
  g.targets.reserve(dir.size());
  for (auto& [u, v] : dir) g.targets.push_back(static_cast<int32_t>(v));
  return g;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load error: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

Graph load_graph(const std::string& edge_path, const std::string& feature_path) {
  // Features first: they fix the node count.
  std::vector<std::vector<double>> rows;
  for (const std::string& line : read_lines(feature_path)) {
    if (blank(line)) continue;
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof())
      throw ValidationError("format error: bad feature value in " + feature_path +
                            " line " + std::to_string(rows.size() + 1));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError("format error: ragged feature row in " + feature_path +
                            " line " + std::to_string(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("format error: empty feature file " + feature_path);
  Matrix features = Matrix::from_rows(rows);
  int n = features.rows;

  std::vector<std::pair<int, int>> edges;
  int lineno = 0;
  for (const std::string& line : read_lines(edge_path)) {
    ++lineno;
    if (blank(line)) continue;
    std::istringstream ss(line);
    long long u, v;
    if (!(ss >> u >> v))
      throw ValidationError("format error: bad edge line " + std::to_string(lineno) +
                            " in " + edge_path);
    std::string rest;
    if (ss >> rest)
      throw ValidationError("format error: trailing tokens on edge line " +
                            std::to_string(lineno) + " in " + edge_path);
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw ValidationError("load error: edge (" + std::to_string(u) + ", " +
                            std::to_string(v) + ") references node outside [0, " +
                            std::to_string(n) + ") in " + edge_path);
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }
  return build_graph(n, edges, std::move(features));
}

void save_graph(const Graph& g, const std::string& edge_path,
                const std::string& feature_path) {
  std::ofstream eo(edge_path);
  if (!eo) throw ValidationError("load error: cannot write " + edge_path);
  // Each undirected edge exactly once (u <= v covers self-loops too).
  for (int u = 0; u < g.num_nodes; ++u)
    for (int32_t v : g.neighbors(u))
      if (u <= v) eo << u << " " << v << "\n";

  std::ofstream fo(feature_path);
  if (!fo) throw ValidationError("load error: cannot write " + feature_path);
  for (int i = 0; i < g.num_nodes; ++i) {
    for (int j = 0; j < g.features.cols; ++j) {
      if (j) fo << " ";
      fo << fmt_g(g.features(i, j));
    }
    fo << "\n";
  }
}

FeatureStats feature_stats(const Graph& g) {
  FeatureStats s;
  int d = g.features.cols;
  s.mean.assign(d, 0.0);
  s.stdev.assign(d, 0.0);
  if (g.num_nodes == 0) return s;
  for (int i = 0; i < g.num_nodes; ++i) {
    s.max_row_norm = std::max(s.max_row_norm, row_norm(g.features, i));
    for (int j = 0; j < d; ++j) s.mean[j] += g.features(i, j);
  }
  for (int j = 0; j < d; ++j) s.mean[j] /= g.num_nodes;
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < d; ++j) {
      double c = g.features(i, j) - s.mean[j];
      s.stdev[j] += c * c;
    }
  for (int j = 0; j < d; ++j) s.stdev[j] = std::sqrt(s.stdev[j] / g.num_nodes);
  return s;
}

Graph row_normalize(const Graph& g) {
  Graph out = g;
  for (int i = 0; i < out.features.rows; ++i) {
    double n = row_norm(out.features, i);
    if (n > 0.0)
      for (int j = 0; j < out.features.cols; ++j) out.features(i, j) /= n;
  }
  return out;
}

std::vector<int> neighbor_sample(const Graph& g, int node, int fanout, RngStream& rng) {
  if (node < 0 || node >= g.num_nodes)
    throw ValidationError("neighbor_sample: node out of range");
  if (fanout < 0) throw ValidationError("neighbor_sample: negative fanout");
  auto nb = g.neighbors(node);
  int deg = static_cast<int>(nb.size());
  if (deg <= fanout) return {nb.begin(), nb.end()};
  std::vector<int> idx = rng.sample_without_replacement(deg, fanout);
  std::vector<int> out;
  out.reserve(fanout);
  for (int k : idx) out.push_back(nb[k]);
  return out;  // already ascending: idx is sorted and nb is sorted
}

Matrix svd_project(const Matrix& features, int target_dim) {
  int mx = std::min(features.rows, features.cols);
  if (target_dim < 1 || target_dim > mx)
    throw ValidationError("dimension error: svd_project target_dim " +
                          std::to_string(target_dim) + " outside [1, " +
                          std::to_string(mx) + "]");
  SvdResult s = svd_thin(features);
  Matrix out = Matrix::zeros(features.rows, target_dim);
  for (int k = 0; k < target_dim; ++k) {
    // Deterministic sign: largest-magnitude entry of each left singular
    // vector made positive.
    int arg = 0;
    for (int r = 1; r < s.u.rows; ++r)
      if (std::fabs(s.u(r, k)) > std::fabs(s.u(arg, k))) arg = r;
    double sign = s.u(arg, k) < 0.0 ? -1.0 : 1.0;
    for (int i = 0; i < features.rows; ++i)
      out(i, k) = sign * s.u(i, k) * s.sigma[k];
  }
  return out;
}

Graph disjoint_union(const std::vector<Graph>& graphs) {
  if (graphs.empty()) throw ValidationError("disjoint_union: empty input");
  int d = graphs.front().feature_dim();
  int total = 0;
  size_t total_edges = 0;
  for (const Graph& g : graphs) {
    if (g.feature_dim() != d)
      throw ValidationError("dimension error: disjoint_union feature dims differ");
    total += g.num_nodes;
    total_edges += g.targets.size();
  }
  Graph out;
  out.num_nodes = total;
  out.features = Matrix::zeros(total, d);
  out.offsets.assign(total + 1, 0);
  out.targets.reserve(total_edges);
  out.graph_id_of_node.reserve(total);
  int base = 0;
  for (size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = graphs[gi];
    for (int i = 0; i < g.num_nodes; ++i) {
      out.graph_id_of_node.push_back(static_cast<int32_t>(gi));
      for (int j = 0; j < d; ++j) out.features(base + i, j) = g.features(i, j);
      for (int32_t t : g.neighbors(i)) out.targets.push_back(t + base);
      out.offsets[base + i + 1] = static_cast<int64_t>(out.targets.size());
    }
    base += g.num_nodes;
  }
  return out;
}

Matrix neighbor_mean(const Graph& g, const Matrix& x) {
  if (x.rows != g.num_nodes)
    throw ValidationError("dimension error: neighbor_mean rows != num_nodes");
  Matrix out = Matrix::zeros(x.rows, x.cols);
  for (int i = 0; i < g.num_nodes; ++i) {
    int deg = g.degree(i);
    if (deg == 0) continue;
    double inv = 1.0 / deg;
    for (int32_t j : g.neighbors(i))
      for (int c = 0; c < x.cols; ++c) out(i, c) += x(j, c) * inv;
  }
  return out;
}

}  // namespace tasktree
