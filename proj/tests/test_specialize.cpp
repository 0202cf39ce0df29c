#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "tasktree/common.hpp"
#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"
#include "tasktree/graph.hpp"
#include "tasktree/rng.hpp"
#include "tasktree/specialize.hpp"
#include "tasktree/task_tree.hpp"
#include "test_util.hpp"

using namespace tasktree;
using testutil::max_abs_diff;

namespace {

// Identity pass-through encoder on an edgeless graph: projected task-tree
// embeddings equal the raw feature rows, so SFT losses are hand-computable.
EncoderParams identity_params(int d) {
  EncoderParams p;
  p.feature_dim = d;
  p.hidden_dim = d;
  p.num_layers = 1;
  p.activation = Activation::kIdentity;
  p.w1 = {Matrix::identity(d)};
  p.w2 = {Matrix::identity(d)};
  p.projector = Matrix::identity(d);
  p.head1 = Matrix::identity(d);
  p.head2 = Matrix::identity(d);
  return p;
}

Dataset labeled_dataset(uint64_t seed, int per_class, int hidden_for_vectors) {
  Dataset d = testutil::two_cluster_dataset(seed, per_class);
  RngStream rng(seed + 1);
  d.class_vectors = Matrix(2, hidden_for_vectors);
  for (size_t i = 0; i < d.class_vectors.a.size(); ++i)
    d.class_vectors.a[i] = rng.normal();
  return d;
}

}  // namespace

TEST_CASE("sft_loss is the mean squared distance to the label's instruction") {
  Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 2.0}, {3.0, 3.0}});
  Graph g = build_graph(3, {}, x);
  EncoderParams p = identity_params(2);

  std::vector<TaskInstance> tasks;
  for (int i = 0; i < 3; ++i) {
    TaskInstance t;
    t.kind = TaskKind::kNode;
    t.relevant = {i};
    t.label = (i == 2) ? 1 : 0;
    tasks.push_back(t);
  }
  Matrix instructions = Matrix::from_rows({{1.0, 1.0}, {2.0, 2.0}});

  // ||(1,0)-(1,1)||^2 = 1, ||(0,2)-(1,1)||^2 = 2, ||(3,3)-(2,2)||^2 = 2.
  CHECK(sft_loss(p, g, tasks, instructions) ==
        doctest::Approx((1.0 + 2.0 + 2.0) / 3.0).epsilon(1e-14));

  CHECK_THROWS_WITH_AS(sft_loss(p, g, {}, instructions), "sft_loss: empty task batch",
                       ValidationError);
  Matrix wrong = Matrix::from_rows({{1.0, 1.0, 1.0}});
  CHECK_THROWS_WITH_AS(sft_loss(p, g, tasks, wrong),
                       "config error: instruction dim 3 != embedding dim 2",
                       ValidationError);
  std::vector<TaskInstance> high = tasks;
  high[0].label = 5;
  CHECK_THROWS_WITH_AS(sft_loss(p, g, high, instructions),
                       "config error: no instruction row for label 5", ValidationError);
}

TEST_CASE("specialize descends the SFT objective deterministically") {
  int hidden = 6;
  Dataset d = labeled_dataset(51, 20, hidden);
  EncoderParams start = init_params(4, hidden, 2, 99, Activation::kRelu, 0.0, false);

  SFTConfig cfg;
  cfg.epochs = 8;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 16;
  cfg.seed = 3;

  SpecializeResult a = specialize(start, d, cfg);
  REQUIRE(static_cast<int>(a.log.size()) == cfg.epochs);
  for (double v : a.log) CHECK(is_finite(v));
  CHECK(a.log.back() < a.log.front());

  // Deterministic: identical logs and final parameters on a re-run.
  SpecializeResult b = specialize(start, d, cfg);
  for (size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i] == b.log[i]);
  auto pa = a.params.all(), pb = b.params.all();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(max_abs_diff(*pa[i], *pb[i]) == 0.0);

  // The training loss actually reflects the SFT objective on the train split.
  std::vector<TaskInstance> train_tasks;
  for (int idx : d.split("train")) train_tasks.push_back(d.tasks[static_cast<size_t>(idx)]);
  double final_loss = sft_loss(a.params, d.graph, train_tasks, d.class_vectors);
  double start_loss = sft_loss(start, d.graph, train_tasks, d.class_vectors);
  CHECK(final_loss < start_loss);
}

TEST_CASE("specialize never mutates the input parameters") {
  int hidden = 5;
  Dataset d = labeled_dataset(52, 12, hidden);
  EncoderParams start = init_params(4, hidden, 1, 7, Activation::kRelu, 0.0, false);
  EncoderParams snapshot = start;  // deep copy

  SFTConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 8;
  SpecializeResult r = specialize(start, d, cfg);

  auto sa = start.all(), sb = snapshot.all();
  for (size_t i = 0; i < sa.size(); ++i) CHECK(max_abs_diff(*sa[i], *sb[i]) == 0.0);
  // And the result did move.
  double moved = 0.0;
  auto ra = r.params.all();
  for (size_t i = 0; i < ra.size(); ++i) moved += max_abs_diff(*ra[i], *sa[i]);
  CHECK(moved > 0.0);
}

TEST_CASE("specialize input validation") {
  int hidden = 5;
  EncoderParams start = init_params(4, hidden, 1, 7, Activation::kRelu, 0.0, false);
  SFTConfig cfg;

  Dataset no_vectors = testutil::two_cluster_dataset(53, 12);
  no_vectors.name = "plain";
  CHECK_THROWS_WITH_AS(specialize(start, no_vectors, cfg),
                       "config error: dataset 'plain' has no class vectors for instruction tuning",
                       ValidationError);

  Dataset d = labeled_dataset(54, 12, hidden);
  SFTConfig bad = cfg;
  bad.epochs = -2;
  CHECK_THROWS_WITH_AS(specialize(start, d, bad), "config error: negative epochs",
                       ValidationError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_WITH_AS(specialize(start, d, bad),
                       "config error: batch_size must be >= 1", ValidationError);

  Dataset empty_train = d;
  empty_train.splits["train"].clear();
  CHECK_THROWS_WITH_AS(specialize(start, empty_train, cfg),
                       "config error: empty SFT train split", ValidationError);

  Dataset stray = d;
  stray.tasks[static_cast<size_t>(stray.split("train")[0])].label = 9;
  CHECK_THROWS_WITH_AS(specialize(start, stray, cfg),
                       "config error: no instruction row for label 9", ValidationError);
}
