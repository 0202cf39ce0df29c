#pragma once

#include <cstdint>
#include <string>

#include "tasktree/dataset.hpp"

namespace tasktree {

// Two-domain synthetic benchmark.  Domain A is a stochastic-block-model
// community graph with class-conditional Gaussian node features and one node
// task per node.  Domain B is a disjoint union of small motif graphs --
// triangle-rich rings with chords vs. hub-and-spoke stars -- with one graph
// task per component.  The domains share feature_dim so they can be
// pretrained jointly.  All draws flow from named substreams of the seed, so
// a fixed (params, seed) pair reproduces the bundle byte for byte.
struct SynthParams {
  int feature_dim = 8;

  // Domain A (node tasks).
  int a_num_nodes = 200;
  int a_num_classes = 4;            // must be <= feature_dim
  double a_separation = 5.0;        // class-mean offset in noise-sigma units
  double a_intra_edge_prob = 0.10;  // same-community edge probability
  double a_inter_edge_prob = 0.01;

  // Domain B (graph tasks, two classes).
  int b_num_graphs = 200;
  int b_min_nodes = 6;
  int b_max_nodes = 12;
  double b_feature_noise = 0.05;  // sigma of the trailing noise dimensions

  // Frozen reference encoder whose per-class centroids over the train split
  // become class_vectors.txt (and double as instruction vectors).
  int hidden_dim = 16;
  int num_layers = 2;
};

Dataset make_domain_a(const SynthParams& p, uint64_t seed);
Dataset make_domain_b(const SynthParams& p, uint64_t seed);

// Writes <out_dir>/domain_a and <out_dir>/domain_b bundles.
void synth(const SynthParams& p, uint64_t seed, const std::string& out_dir);

}  // namespace tasktree
