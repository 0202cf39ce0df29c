#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "oracle_values.hpp"
#include "tasktree/common.hpp"
#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"
#include "tasktree/graph.hpp"
#include "tasktree/pretrain.hpp"
#include "tasktree/rng.hpp"
#include "test_util.hpp"

using namespace tasktree;
using testutil::mat;
using testutil::max_abs_diff;

namespace {

PretrainConfig desk_config(uint64_t seed) {
  PretrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  cfg.weight_decay = 1e-8;
  cfg.lambda = 1.0;
  cfg.fanout = 5;
  cfg.seed = seed;
  cfg.hidden_dim = 8;
  cfg.num_layers = 2;
  cfg.dropout_rate = 0.1;
  return cfg;
}

std::set<std::pair<int, int>> undirected_edges(const Graph& g) {
  std::set<std::pair<int, int>> out;
  for (int u = 0; u < g.num_nodes; ++u)
    for (int v : g.neighbors(u))
      if (u <= v) out.emplace(u, v);
  return out;
}

}  // namespace

TEST_CASE("corrupt honors the documented draw order") {
  RngStream gen(41);
  Graph g = testutil::random_graph(gen, 20, 3, 0.2);
  CorruptionConfig cfg;
  cfg.edge_drop_rate = 0.4;
  cfg.feature_mask_rate = 0.3;

  RngStream used(777);
  Graph c = corrupt(g, cfg, used);

  // Reference: one uniform per undirected edge in CSR (u <= v) order, then
  // one uniform per feature row.
  RngStream ref(777);
  std::set<std::pair<int, int>> expect_edges;
  for (int u = 0; u < g.num_nodes; ++u)
    for (int v : g.neighbors(u)) {
      if (u > v) continue;
      if (ref.uniform() < cfg.edge_drop_rate) continue;
      expect_edges.emplace(u, v);
    }
  std::vector<bool> masked(static_cast<size_t>(g.num_nodes));
  for (int i = 0; i < g.num_nodes; ++i) masked[static_cast<size_t>(i)] = ref.uniform() < cfg.feature_mask_rate;

  CHECK(undirected_edges(c) == expect_edges);
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(c.features(i, j) == (masked[static_cast<size_t>(i)] ? 0.0 : g.features(i, j)));
}

TEST_CASE("corrupt edge cases") {
  RngStream gen(42);
  Graph g = testutil::random_graph(gen, 15, 3, 0.3);

  SUBCASE("zero rates change nothing") {
    RngStream rng(1);
    Graph c = corrupt(g, CorruptionConfig{0.0, 0.0}, rng);
    CHECK(c.offsets == g.offsets);
    CHECK(c.targets == g.targets);
    CHECK(max_abs_diff(c.features, g.features) == 0.0);
  }
  SUBCASE("unit rates remove everything") {
    RngStream rng(1);
    Graph c = corrupt(g, CorruptionConfig{1.0, 1.0}, rng);
    CHECK(c.targets.empty());
    for (double v : c.features.a) CHECK(v == 0.0);
  }
  SUBCASE("deterministic per stream, corrupted edges are a subset") {
    RngStream a(9), b(9);
    Graph ca = corrupt(g, CorruptionConfig{0.5, 0.5}, a);
    Graph cb = corrupt(g, CorruptionConfig{0.5, 0.5}, b);
    CHECK(ca.offsets == cb.offsets);
    CHECK(ca.targets == cb.targets);
    CHECK(max_abs_diff(ca.features, cb.features) == 0.0);
    auto orig = undirected_edges(g);
    for (const auto& e : undirected_edges(ca)) CHECK(orig.count(e) == 1);
  }
  SUBCASE("rates outside [0,1] are rejected") {
    RngStream rng(1);
    CHECK_THROWS_WITH_AS(corrupt(g, CorruptionConfig{-0.1, 0.0}, rng),
                         "corrupt: rates must lie in [0, 1]", ValidationError);
    CHECK_THROWS_WITH_AS(corrupt(g, CorruptionConfig{0.0, 1.5}, rng),
                         "corrupt: rates must lie in [0, 1]", ValidationError);
  }
}

TEST_CASE("reconstruction_loss matches the identity-head oracle") {
  EncoderParams p;
  p.feature_dim = 3;
  p.hidden_dim = 3;
  p.num_layers = 1;
  p.activation = Activation::kIdentity;
  p.w1 = {Matrix::identity(3)};
  p.w2 = {Matrix::identity(3)};
  p.projector = Matrix::identity(3);
  p.head1 = Matrix::identity(3);
  p.head2 = Matrix::identity(3);

  Matrix zh = mat(oracle::recon_zhat_rows, oracle::recon_zhat_cols, oracle::recon_zhat);
  Matrix zt = mat(oracle::recon_ztilde_rows, oracle::recon_ztilde_cols, oracle::recon_ztilde);
  CHECK(reconstruction_loss(p, zh, zt) ==
        doctest::Approx(oracle::recon_identity_head_value).epsilon(1e-14));

  // The symmetric form is invariant under swapping the two views, for any head.
  RngStream rng(43);
  EncoderParams q = init_params(3, 3, 1, rng.u64());
  CHECK(reconstruction_loss(q, zh, zt) ==
        doctest::Approx(reconstruction_loss(q, zt, zh)).epsilon(1e-14));

  Matrix wrong(3, 3);
  CHECK_THROWS_WITH_AS(reconstruction_loss(p, zh, wrong),
                       "dimension error: reconstruction_loss shape mismatch", ValidationError);
  Matrix empty(0, 3);
  CHECK_THROWS_WITH_AS(reconstruction_loss(p, empty, empty),
                       "reconstruction_loss: empty batch", ValidationError);
}

TEST_CASE("domain_regularizer matches the frozen oracles") {
  Matrix z2 = Matrix::from_rows({{1.0, -1.0}, {-1.0, 1.0}});
  CHECK(domain_regularizer(z2) == doctest::Approx(oracle::reg_twodim_value).epsilon(1e-14));
  Matrix z4 = mat(oracle::reg_batch_rows, oracle::reg_batch_cols, oracle::reg_batch);
  CHECK(domain_regularizer(z4) == doctest::Approx(oracle::reg_batch_value).epsilon(1e-14));
  Matrix empty(0, 2);
  CHECK_THROWS_WITH_AS(domain_regularizer(empty), "domain_regularizer: empty batch",
                       ValidationError);
}

TEST_CASE("adamw_step reproduces the scalar reference trace") {
  Matrix theta = Matrix::from_rows({{1.0}});
  std::vector<Matrix*> params{&theta};
  AdamState state = AdamState::init(params);
  double grad_seq[] = {0.3, -0.2, 0.05};
  for (int t = 0; t < 3; ++t) {
    Matrix g = Matrix::from_rows({{grad_seq[t]}});
    std::vector<Matrix*> grads{&g};
    adamw_step(params, grads, 0.1, 0.01, state);
    CHECK(theta(0, 0) == doctest::Approx(oracle::adamw_trace[t]).epsilon(1e-12));
  }
  CHECK(state.t == 3);
}

TEST_CASE("adamw_step contract checks") {
  Matrix theta = Matrix::from_rows({{1.0}});
  std::vector<Matrix*> params{&theta};
  AdamState state = AdamState::init(params);
  CHECK_THROWS_WITH_AS(adamw_step(params, {}, 0.1, 0.0, state),
                       "adamw_step: parameter/gradient/state count mismatch", ValidationError);
  Matrix wrong(2, 1);
  std::vector<Matrix*> bad{&wrong};
  CHECK_THROWS_WITH_AS(adamw_step(params, bad, 0.1, 0.0, state),
                       "adamw_step: gradient shape mismatch", ValidationError);
  Matrix nang = Matrix::from_rows({{std::nan("")}});
  std::vector<Matrix*> nan_grads{&nang};
  CHECK_THROWS_WITH_AS(adamw_step(params, nan_grads, 0.1, 0.0, state),
                       doctest::Contains("non-finite gradient"), NumericError);
}

TEST_CASE("pretrain: loss decreases, runs are deterministic") {
  Dataset d1 = testutil::two_cluster_dataset(101, 24);
  Dataset d2 = testutil::two_cluster_dataset(202, 24);
  PretrainConfig cfg = desk_config(7);

  PretrainResult a = pretrain({d1, d2}, cfg, CorruptionConfig{});
  PretrainResult b = pretrain({d1, d2}, cfg, CorruptionConfig{});

  REQUIRE(static_cast<int>(a.log.size()) == cfg.epochs);
  for (const LossBreakdown& lb : a.log) {
    CHECK(is_finite(lb.total));
    CHECK(lb.total == doctest::Approx(lb.recon + cfg.lambda * lb.kl).epsilon(1e-12));
  }
  CHECK(a.log.back().total < a.log.front().total);

  // Bitwise determinism: identical logs and identical parameters.
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].recon == b.log[i].recon);
    CHECK(a.log[i].kl == b.log[i].kl);
    CHECK(a.log[i].total == b.log[i].total);
  }
  auto pa = a.params.all(), pb = b.params.all();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(max_abs_diff(*pa[i], *pb[i]) == 0.0);
}

TEST_CASE("pretrain: zero epochs returns the untouched initialization") {
  Dataset d = testutil::two_cluster_dataset(103, 16);
  PretrainConfig cfg = desk_config(11);
  cfg.epochs = 0;
  PretrainResult r0 = pretrain({d}, cfg, CorruptionConfig{});
  CHECK(r0.log.empty());
  cfg.epochs = 1;
  PretrainResult r1 = pretrain({d}, cfg, CorruptionConfig{});
  // One step moves at least one parameter away from the shared init.
  double moved = 0.0;
  auto p0 = r0.params.all(), p1 = r1.params.all();
  for (size_t i = 0; i < p0.size(); ++i) moved += max_abs_diff(*p0[i], *p1[i]);
  CHECK(moved > 0.0);
}

TEST_CASE("pretrain: the regularizer weight changes the trajectory") {
  Dataset d1 = testutil::two_cluster_dataset(104, 16);
  Dataset d2 = testutil::two_cluster_dataset(105, 16);
  PretrainConfig with = desk_config(13);
  PretrainConfig without = desk_config(13);
  with.lambda = 5.0;
  without.lambda = 0.0;
  PretrainResult rw = pretrain({d1, d2}, with, CorruptionConfig{});
  PretrainResult ro = pretrain({d1, d2}, without, CorruptionConfig{});
  double moved = 0.0;
  auto pw = rw.params.all(), po = ro.params.all();
  for (size_t i = 0; i < pw.size(); ++i) moved += max_abs_diff(*pw[i], *po[i]);
  CHECK(moved > 0.0);
  CHECK(ro.log.back().total == doctest::Approx(ro.log.back().recon).epsilon(1e-12));
}

TEST_CASE("pretrain input validation") {
  Dataset d = testutil::two_cluster_dataset(106, 16);
  PretrainConfig cfg = desk_config(1);
  CHECK_THROWS_WITH_AS(pretrain({}, cfg, CorruptionConfig{}),
                       "config error: pretrain needs >= 1 dataset", ValidationError);
  PretrainConfig bad = cfg;
  bad.epochs = -1;
  CHECK_THROWS_WITH_AS(pretrain({d}, bad, CorruptionConfig{}),
                       "config error: negative epochs", ValidationError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_WITH_AS(pretrain({d}, bad, CorruptionConfig{}),
                       "config error: batch_size must be >= 1", ValidationError);
  bad = cfg;
  bad.lambda = -2.0;
  CHECK_THROWS_WITH_AS(pretrain({d}, bad, CorruptionConfig{}),
                       "config error: lambda must be >= 0", ValidationError);
  Dataset other = testutil::two_cluster_dataset(107, 16, 6);  // different feature dim
  CHECK_THROWS_WITH_AS(pretrain({d, other}, cfg, CorruptionConfig{}),
                       "config error: datasets disagree on feature dim", ValidationError);
}
