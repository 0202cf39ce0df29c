#pragma once

#include <map>
#include <string>
#include <vector>

#include "tasktree/graph.hpp"
#include "tasktree/matrix.hpp"
#include "tasktree/task_tree.hpp"

namespace tasktree {

// A labeled task collection over one graph (possibly a disjoint union of
// components), with named splits and optional per-class instruction vectors.
struct Dataset {
  std::string name;
  Graph graph;
  std::vector<TaskInstance> tasks;
  int num_classes = 0;
  std::map<std::string, std::vector<int>> splits;  // split name -> task indices
  Matrix class_vectors;                            // 0x0 when absent

  bool has_class_vectors() const { return class_vectors.rows > 0; }
  const std::vector<int>& split(const std::string& name) const;
  std::vector<int> split_or_all(const std::string& name) const;
};

// Bundle directory layout: edges.txt ("u v" rows), features.txt (one row per
// node), tasks.txt ("kind node-ids... label"), splits.txt ("split-name
// task-index"), class_vectors.txt (optional, one row per class).
Dataset load_dataset(const std::string& dir);
void save_dataset(const Dataset& d, const std::string& dir);

// Labels of the given task indices.
std::vector<int> labels_of(const Dataset& d, const std::vector<int>& task_idx);

}  // namespace tasktree
