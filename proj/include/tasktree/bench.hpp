#pragma once

#include <cstdint>
#include <string>

#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"

namespace tasktree {

// Wall-clock comparison of the two task-encoding pipelines on identical task
// batches and identical seeds:
//   tree:     assemble per-task stars on the shared graph (extraction is the
//             augmentation step), then one full-graph forward + task means.
//   subgraph: extract a k-hop ego subgraph per task, then one forward per
//             subgraph + root means.
struct BenchConfig {
  int reps = 5;        // medians are taken over this many repetitions
  int batch_size = 512;
  int hops = 2;        // subgraph radius
  uint64_t seed = 0;
};

struct PhaseTimes {
  double sampling_ms = 0.0;
  double extraction_ms = 0.0;
  double encoding_ms = 0.0;
  double total_ms = 0.0;  // median of per-rep totals, not the sum of medians
};

struct BenchReport {
  PhaseTimes tree, subgraph;
  int reps = 0, batch_size = 0, hops = 0;
  std::string lines() const;
};

BenchReport run_bench(const Dataset& d, const EncoderParams& p, const BenchConfig& cfg);

// Random community graph with Gaussian features and `num_tasks` node tasks;
// deterministic in seed.  Used as the default bench workload.
Dataset make_bench_dataset(int num_nodes, int num_tasks, int feature_dim,
                           uint64_t seed);

}  // namespace tasktree
