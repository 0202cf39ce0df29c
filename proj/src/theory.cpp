#include "tasktree/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tasktree/common.hpp"

namespace tasktree {

bool StabilityReport::chain_ok() const {
  // Pure float-rounding slack; the chain is exact in real arithmetic.
  auto leq = [](double a, double b) { return a <= b * (1.0 + 1e-9) + 1e-12; };
  return leq(delta, pairwise_bound) && leq(pairwise_bound, global_bound);
}

std::string StabilityReport::lines() const {
  std::string s;
  s += "delta " + fmt_g(delta) + "\n";
  s += "pairwise_bound " + fmt_g(pairwise_bound) + "\n";
  s += "global_bound " + fmt_g(global_bound) + "\n";
  s += "c_sigma " + fmt_g(c_sigma) + "\n";
  s += "b_w1 " + fmt_g(b_w1) + "\n";
  s += "b_w2 " + fmt_g(b_w2) + "\n";
  s += "b_x " + fmt_g(b_x) + "\n";
  s += "depth " + std::to_string(depth) + "\n";
  s += std::string("chain ") + (chain_ok() ? "ok" : "VIOLATED") + "\n";
  return s;
}

namespace {

// Root embeddings of the depth-L unrolled trees: Horner evaluation of
// sum_l x^(l) W1^T (W2^T)^l followed by the activation.
Matrix unrolled_phi(const SubtreeInfo& info, const EncoderParams& p) {
  int L = info.depth;
  Matrix acc = matmul_nt(info.levels[L - 1], p.w1_at(0));
  for (int l = L - 2; l >= 0; --l)
    acc = add(matmul_nt(acc, p.w2_at(0)), matmul_nt(info.levels[l], p.w1_at(0)));
  return p.activation == Activation::kRelu ? relu(acc) : acc;
}

Matrix mean_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out = Matrix::zeros(1, m.cols);
  for (int r : rows)
    for (int c = 0; c < m.cols; ++c)
      out(0, c) += m(r, c) / static_cast<double>(rows.size());
  return out;
}

}  // namespace

StabilityReport stability_check(const Graph& g1, const TaskInstance& task1,
                                const Graph& g2, const TaskInstance& task2,
                                const EncoderParams& params, int depth) {
  if (!params.tied_weights)
    throw ValidationError("contract error: stability_check requires tied weights");
  if (params.dropout_rate != 0.0)
    throw ValidationError("contract error: stability_check requires zero dropout");
  if (depth < 1) throw ValidationError("stability_check: depth must be >= 1");
  if (g1.feature_dim() != params.feature_dim || g2.feature_dim() != params.feature_dim)
    throw ValidationError("dimension error: stability_check feature dims");

  StabilityReport r;
  r.depth = depth;
  r.c_sigma = 1.0;  // both supported activations are 1-Lipschitz
  r.b_w1 = spectral_norm(params.w1_at(0));
  r.b_w2 = spectral_norm(params.w2_at(0));
  r.b_x = std::max(feature_stats(g1).max_row_norm, feature_stats(g2).max_row_norm);

  std::vector<int> roots1 = relevant_nodes(task1, g1);
  std::vector<int> roots2 = relevant_nodes(task2, g2);
  SubtreeInfo info1 = subtree_info(g1, depth);
  SubtreeInfo info2 = subtree_info(g2, depth);

  Matrix z1 = mean_rows(unrolled_phi(info1, params), roots1);
  Matrix z2 = mean_rows(unrolled_phi(info2, params), roots2);
  double d2 = 0.0;
  for (int c = 0; c < z1.cols; ++c) {
    double d = z1(0, c) - z2(0, c);
    d2 += d * d;
  }
  r.delta = std::sqrt(d2);

  double c1 = r.c_sigma * r.b_w1;
  double c2 = r.c_sigma * r.b_w2;
  // Accumulate per-(pair, level) terms in sorted order so the result is
  // bitwise symmetric under swapping the two inputs.
  std::vector<double> terms;
  terms.reserve(roots1.size() * roots2.size() * depth);
  double c2l = 1.0;
  for (int l = 0; l < depth; ++l) {
    const Matrix& x1 = info1.levels[l];
    const Matrix& x2 = info2.levels[l];
    for (int i : roots1)
      for (int j : roots2) {
        double s = 0.0;
        for (int c = 0; c < x1.cols; ++c) {
          double d = x1(i, c) - x2(j, c);
          s += d * d;
        }
        terms.push_back(c1 * c2l * std::sqrt(s));
      }
    c2l *= c2;
  }
  std::sort(terms.begin(), terms.end());
  double pair_sum = 0.0;
  for (double t : terms) pair_sum += t;
  r.pairwise_bound =
      pair_sum / (static_cast<double>(roots1.size()) * static_cast<double>(roots2.size()));

  if (std::fabs(c2 - 1.0) < 1e-12) {
    r.global_bound = 2.0 * r.b_x * c1 * depth;
  } else {
    r.global_bound = 2.0 * r.b_x * c1 * (std::pow(c2, depth) - 1.0) / (c2 - 1.0);
  }
  return r;
}

std::string TransferProbeReport::lines() const {
  return "lhs " + fmt_g(lhs) + "\nrhs " + fmt_g(rhs) + "\nratio " + fmt_g(ratio) + "\n";
}

namespace {

// Empirical risk of the exact ridge least-squares map from X to Y.
double lsq_risk(const Matrix& x, const Matrix& y) {
  Matrix w = ridge_least_squares(x, y, 1e-8);
  Matrix pred = matmul(x, w);
  double total = 0.0;
  for (size_t i = 0; i < pred.a.size(); ++i) {
    double d = pred.a[i] - y.a[i];
    total += d * d;
  }
  return total / x.rows;
}

Matrix one_hot(const std::vector<int>& labels, int num_classes) {
  Matrix y = Matrix::zeros(static_cast<int>(labels.size()), num_classes);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw ValidationError("one_hot: label out of range");
    y(static_cast<int>(i), labels[i]) = 1.0;
  }
  return y;
}

}  // namespace

TransferProbeReport transfer_probe(const EncoderParams& phi_a,
                                   const EncoderParams& phi_b,
                                   const Dataset& pretrain_data,
                                   const Dataset& downstream_data,
                                   uint64_t seed,
                                   const CorruptionConfig& corruption) {
  if (phi_a.hidden_dim != phi_b.hidden_dim)
    throw ValidationError("dimension error: transfer_probe encoders disagree on dim");
  if (pretrain_data.tasks.empty() || downstream_data.tasks.empty())
    throw ValidationError("config error: transfer_probe needs non-empty datasets");

  // Downstream: squared-loss risk against one-hot labels.
  int num_classes = std::max(1, downstream_data.num_classes);
  std::vector<int> all_down(downstream_data.tasks.size());
  for (size_t i = 0; i < all_down.size(); ++i) all_down[i] = static_cast<int>(i);
  Matrix y_down = one_hot(labels_of(downstream_data, all_down), num_classes);
  Matrix xa = encode_task_trees_projected(phi_a, downstream_data.graph,
                                          downstream_data.tasks);
  Matrix xb = encode_task_trees_projected(phi_b, downstream_data.graph,
                                          downstream_data.tasks);

  TransferProbeReport r;
  r.lhs = lsq_risk(xa, y_down) - lsq_risk(xb, y_down);

  // Pretraining objective: linear reconstruction from corrupted-view
  // embeddings to clean embeddings.  Both encoders see the same corrupted
  // graph so the comparison isolates the encoder.
  RngStream rng = substream(seed, "corruption");
  Graph corrupted = corrupt(pretrain_data.graph, corruption, rng);
  Matrix ca = encode_task_trees_projected(phi_a, corrupted, pretrain_data.tasks);
  Matrix cb = encode_task_trees_projected(phi_b, corrupted, pretrain_data.tasks);
  Matrix ta = encode_task_trees_projected(phi_a, pretrain_data.graph,
                                          pretrain_data.tasks);
  Matrix tb = encode_task_trees_projected(phi_b, pretrain_data.graph,
                                          pretrain_data.tasks);
  r.rhs = lsq_risk(ca, ta) - lsq_risk(cb, tb);
  r.ratio = r.rhs > 0.0 ? r.lhs / std::sqrt(r.rhs)
                        : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::string DistributionGapReport::lines() const { return "gap " + fmt_g(gap) + "\n"; }

DistributionGapReport distribution_gap(const EncoderParams& phi,
                                       const Dataset& data_p,
                                       const Dataset& data_t) {
  if (data_p.tasks.empty() || data_t.tasks.empty())
    throw ValidationError("config error: distribution_gap needs non-empty samples");
  Matrix ep = encode_task_trees_projected(phi, data_p.graph, data_p.tasks);
  Matrix et = encode_task_trees_projected(phi, data_t.graph, data_t.tasks);
  double d2 = 0.0;
  for (int c = 0; c < ep.cols; ++c) {
    double mp = 0.0, mt = 0.0;
    for (int i = 0; i < ep.rows; ++i) mp += ep(i, c) / ep.rows;
    for (int i = 0; i < et.rows; ++i) mt += et(i, c) / et.rows;
    double d = mp - mt;
    d2 += d * d;
  }
  DistributionGapReport r;
  r.gap = std::sqrt(d2);
  return r;
}

}  // namespace tasktree
