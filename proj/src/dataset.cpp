#include "tasktree/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tasktree/common.hpp"

namespace fs = std::filesystem;

namespace tasktree {

const std::vector<int>& Dataset::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end())
    throw ValidationError("config error: dataset '" + this->name +
                          "' has no split '" + name + "'");
  return it->second;
}

std::vector<int> Dataset::split_or_all(const std::string& name) const {
  auto it = splits.find(name);
  if (it != splits.end()) return it->second;
  std::vector<int> all(tasks.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return all;
}

namespace {

// Connected components in ascending first-node order; disjoint-union bundles
// have one component per original graph, which is how graph-task membership
// is recovered from the flat edge list.
std::vector<int32_t> connected_components(const Graph& g) {
  std::vector<int32_t> comp(g.num_nodes, -1);
  int32_t next = 0;
  std::vector<int> stack;
  for (int s = 0; s < g.num_nodes; ++s) {
    if (comp[s] != -1) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int32_t v : g.neighbors(u))
        if (comp[v] == -1) {
          comp[v] = next;
          stack.push_back(v);
        }
    }
    ++next;
  }
  return comp;
}

Matrix load_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load error: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof())
      throw ValidationError("format error: bad value in " + path + " line " +
                            std::to_string(rows.size() + 1));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError("format error: ragged row in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("format error: empty file " + path);
  return Matrix::from_rows(rows);
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  fs::path base(dir);
  if (!fs::is_directory(base))
    throw ValidationError("load error: dataset directory not found: " + dir);

  Dataset d;
  d.name = base.filename().string();
  if (d.name.empty()) d.name = base.parent_path().filename().string();
  d.graph = load_graph((base / "edges.txt").string(), (base / "features.txt").string());

  // tasks.txt
  {
    std::ifstream in(base / "tasks.txt");
    if (!in) throw ValidationError("load error: cannot open " + (base / "tasks.txt").string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      std::istringstream ss(line);
      std::string kind_word;
      ss >> kind_word;
      std::vector<long long> ints;
      long long v;
      while (ss >> v) ints.push_back(v);
      if (!ss.eof() || ints.size() < 2)
        throw ValidationError("format error: tasks.txt line " + std::to_string(lineno) +
                              ": expected 'kind node-ids... label'");
      TaskInstance t;
      t.kind = task_kind_from_string(kind_word);
      t.label = static_cast<int>(ints.back());
      if (t.label < 0)
        throw ValidationError("format error: tasks.txt line " + std::to_string(lineno) +
                              ": negative label");
      for (size_t i = 0; i + 1 < ints.size(); ++i) {
        if (ints[i] < 0 || ints[i] >= d.graph.num_nodes)
          throw ValidationError("format error: tasks.txt line " + std::to_string(lineno) +
                                ": node id out of range");
        t.relevant.push_back(static_cast<int>(ints[i]));
      }
      if ((t.kind == TaskKind::kNode && t.relevant.size() != 1) ||
          (t.kind == TaskKind::kEdge && t.relevant.size() != 2) ||
          t.relevant.empty())
        throw ValidationError("format error: tasks.txt line " + std::to_string(lineno) +
                              ": wrong node-id count for kind " + kind_word);
      d.tasks.push_back(std::move(t));
    }
  }

  // Graph tasks need component ids, reconstructed from connectivity.
  bool any_graph_task = false;
  for (const TaskInstance& t : d.tasks)
    if (t.kind == TaskKind::kGraph) any_graph_task = true;
  if (any_graph_task) {
    d.graph.graph_id_of_node = connected_components(d.graph);
    for (size_t k = 0; k < d.tasks.size(); ++k) {
      TaskInstance& t = d.tasks[k];
      if (t.kind != TaskKind::kGraph) continue;
      t.component = d.graph.graph_id_of_node[t.relevant.front()];
      std::vector<int> expect = relevant_nodes(t, d.graph);
      std::vector<int> got = t.relevant;
      std::sort(got.begin(), got.end());
      if (got != expect)
        throw ValidationError("format error: graph task " + std::to_string(k) +
                              " does not list exactly its component's nodes");
      t.relevant = std::move(expect);
    }
  }

  // splits.txt
  {
    std::ifstream in(base / "splits.txt");
    if (!in) throw ValidationError("load error: cannot open " + (base / "splits.txt").string());
    std::vector<int> owner(d.tasks.size(), -1);
    std::vector<std::string> split_names;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      std::istringstream ss(line);
      std::string name;
      long long idx;
      if (!(ss >> name >> idx))
        throw ValidationError("format error: splits.txt line " + std::to_string(lineno));
      std::string rest;
      if (ss >> rest)
        throw ValidationError("format error: splits.txt line " + std::to_string(lineno) +
                              ": trailing tokens");
      if (idx < 0 || idx >= static_cast<long long>(d.tasks.size()))
        throw ValidationError("format error: splits.txt line " + std::to_string(lineno) +
                              ": task index out of range");
      int sid;
      auto pos = std::find(split_names.begin(), split_names.end(), name);
      if (pos == split_names.end()) {
        split_names.push_back(name);
        sid = static_cast<int>(split_names.size()) - 1;
      } else {
        sid = static_cast<int>(pos - split_names.begin());
      }
      if (owner[idx] != -1 && owner[idx] != sid)
        throw ValidationError("format error: task " + std::to_string(idx) +
                              " assigned to multiple splits");
      owner[idx] = sid;
      d.splits[name].push_back(static_cast<int>(idx));
    }
    for (auto& [name, idxs] : d.splits) std::sort(idxs.begin(), idxs.end());
  }

  // class_vectors.txt (optional); fixes num_classes when present.
  int max_label = -1;
  for (const TaskInstance& t : d.tasks) max_label = std::max(max_label, t.label);
  fs::path cv = base / "class_vectors.txt";
  if (fs::exists(cv)) {
    d.class_vectors = load_matrix_file(cv.string());
    d.num_classes = d.class_vectors.rows;
    if (max_label >= d.num_classes)
      throw ValidationError("format error: label " + std::to_string(max_label) +
                            " >= class_vectors rows " + std::to_string(d.num_classes));
  } else {
    d.num_classes = max_label + 1;
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& dir) {
  fs::path base(dir);
  fs::create_directories(base);
  save_graph(d.graph, (base / "edges.txt").string(), (base / "features.txt").string());

  std::ofstream to(base / "tasks.txt");
  if (!to) throw ValidationError("load error: cannot write tasks.txt in " + dir);
  for (const TaskInstance& t : d.tasks) {
    to << to_string(t.kind);
    std::vector<int> rel =
        t.kind == TaskKind::kGraph ? relevant_nodes(t, d.graph) : t.relevant;
    for (int v : rel) to << " " << v;
    to << " " << t.label << "\n";
  }
  to.close();

  std::ofstream so(base / "splits.txt");
  if (!so) throw ValidationError("load error: cannot write splits.txt in " + dir);
  for (const auto& [name, idxs] : d.splits) {
    std::vector<int> sorted = idxs;
    std::sort(sorted.begin(), sorted.end());
    for (int i : sorted) so << name << " " << i << "\n";
  }
  so.close();

  if (d.has_class_vectors()) {
    std::ofstream co(base / "class_vectors.txt");
    if (!co) throw ValidationError("load error: cannot write class_vectors.txt in " + dir);
    for (int i = 0; i < d.class_vectors.rows; ++i) {
      for (int j = 0; j < d.class_vectors.cols; ++j) {
        if (j) co << " ";
        co << fmt_g(d.class_vectors(i, j));
      }
      co << "\n";
    }
  }
}

std::vector<int> labels_of(const Dataset& d, const std::vector<int>& task_idx) {
  std::vector<int> out;
  out.reserve(task_idx.size());
  for (int i : task_idx) {
    if (i < 0 || i >= static_cast<int>(d.tasks.size()))
      throw ValidationError("labels_of: task index out of range");
    out.push_back(d.tasks[i].label);
  }
  return out;
}

}  // namespace tasktree
