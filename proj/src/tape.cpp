#include "tasktree/tape.hpp"

#include <algorithm>
#include <cmath>

#include "tasktree/common.hpp"

namespace tasktree {

Matrix softmax_rows(const Matrix& z) {
  Matrix out = Matrix::zeros(z.rows, z.cols);
  for (int i = 0; i < z.rows; ++i) {
    double mx = z(i, 0);
    for (int j = 1; j < z.cols; ++j) mx = std::max(mx, z(i, j));
    double sum = 0.0;
    for (int j = 0; j < z.cols; ++j) {
      out(i, j) = std::exp(z(i, j) - mx);
      sum += out(i, j);
    }
    for (int j = 0; j < z.cols; ++j) out(i, j) /= sum;
  }
  return out;
}

Tape::Id Tape::push(Node n) {
  if (swept_)
    throw ValidationError("tape: cannot add nodes after backward()");
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size()) - 1;
}

const Tape::Node& Tape::at(Id id) const {
  if (id < 0 || id >= static_cast<Id>(nodes_.size()))
    throw ValidationError("tape: node id out of range");
  return nodes_[id];
}

const Matrix& Tape::value(Id id) const { return at(id).value; }

Matrix* Tape::param_storage(Id id) const { return at(id).param; }

Tape::Id Tape::param(Matrix* storage) {
  if (storage == nullptr) throw ValidationError("tape: null param storage");
  Node n{Op::kParam};
  n.value = *storage;
  n.param = storage;
  return push(std::move(n));
}

Tape::Id Tape::constant(Matrix value) {
  Node n{Op::kConst};
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
  Node n{Op::kMatmulNT, a, b};
  n.value = tasktree::matmul_nt(at(a).value, at(b).value);
  return push(std::move(n));
}

Tape::Id Tape::mean_neighbors(Id x, const Graph* g) {
  if (g == nullptr) throw ValidationError("tape: null graph");
  Node n{Op::kMeanNeighbors, x};
  n.graph = g;
  n.value = tasktree::neighbor_mean(*g, at(x).value);
  return push(std::move(n));
}

Tape::Id Tape::mean_groups(Id x, std::shared_ptr<const Groups> groups) {
  if (!groups) throw ValidationError("tape: null groups");
  const Matrix& xv = at(x).value;
  Matrix out = Matrix::zeros(static_cast<int>(groups->size()), xv.cols);
  for (size_t i = 0; i < groups->size(); ++i) {
    const std::vector<int>& grp = (*groups)[i];
    if (grp.empty()) continue;
    double inv = 1.0 / static_cast<double>(grp.size());
    for (int j : grp) {
      if (j < 0 || j >= xv.rows)
        throw ValidationError("tape: group member out of range");
      for (int c = 0; c < xv.cols; ++c)
        out(static_cast<int>(i), c) += xv(j, c) * inv;
    }
  }
  Node n{Op::kMeanGroups, x};
  n.groups = std::move(groups);
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::relu(Id a) {
  Node n{Op::kRelu, a};
  n.value = tasktree::relu(at(a).value);
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  Node n{Op::kAdd, a, b};
  n.value = tasktree::add(at(a).value, at(b).value);
  return push(std::move(n));
}

Tape::Id Tape::add_row_broadcast(Id a, Id bias) {
  const Matrix& av = at(a).value;
  const Matrix& bv = at(bias).value;
  if (bv.rows != 1 || bv.cols != av.cols)
    throw ValidationError("dimension error: add_row_broadcast bias shape");
  Matrix out = av;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += bv(0, j);
  Node n{Op::kAddRowBroadcast, a, bias};
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double s) {
  Node n{Op::kScale, a};
  n.s = s;
  n.value = tasktree::scale(at(a).value, s);
  return push(std::move(n));
}

Tape::Id Tape::mul_mask(Id a, Matrix mask) {
  Node n{Op::kMulMask, a};
  n.value = hadamard(at(a).value, mask);
  n.aux = std::move(mask);
  return push(std::move(n));
}

Tape::Id Tape::row_normalize(Id a) {
  Node n{Op::kRowNormalize, a};
  n.value = row_normalize_eps(at(a).value);
  return push(std::move(n));
}

Tape::Id Tape::stop_grad(Id a) {
  Node n{Op::kStopGrad, a};
  n.value = at(a).value;
  return push(std::move(n));
}

Tape::Id Tape::concat_rows(Id a, Id b) {
  const Matrix& av = at(a).value;
  const Matrix& bv = at(b).value;
  if (av.cols != bv.cols)
    throw ValidationError("dimension error: concat_rows column mismatch");
  Matrix out = Matrix::zeros(av.rows + bv.rows, av.cols);
  std::copy(av.a.begin(), av.a.end(), out.a.begin());
  std::copy(bv.a.begin(), bv.a.end(), out.a.begin() + av.a.size());
  Node n{Op::kConcatRows, a, b};
  n.value = std::move(out);
  return push(std::move(n));
}

Tape::Id Tape::sq_diff_sum(Id a, Id b, double s) {
  const Matrix& av = at(a).value;
  const Matrix& bv = at(b).value;
  if (!av.same_shape(bv))
    throw ValidationError("dimension error: sq_diff_sum shape mismatch");
  double total = 0.0;
  for (size_t i = 0; i < av.a.size(); ++i) {
    double d = av.a[i] - bv.a[i];
    total += d * d;
  }
  Node n{Op::kSqDiffSum, a, b};
  n.s = s;
  n.value = Matrix::zeros(1, 1);
  n.value(0, 0) = s * total;
  return push(std::move(n));
}

Tape::Id Tape::softmax_kl_mean(Id z) {
  const Matrix& zv = at(z).value;
  if (zv.rows < 1) throw ValidationError("softmax_kl_mean: empty batch");
  Matrix meanrow = Matrix::zeros(1, zv.cols);
  for (int i = 0; i < zv.rows; ++i)
    for (int j = 0; j < zv.cols; ++j) meanrow(0, j) += zv(i, j) / zv.rows;
  Matrix h = softmax_rows(meanrow);
  Matrix sm = softmax_rows(zv);
  double total = 0.0;
  for (int i = 0; i < zv.rows; ++i)
    for (int j = 0; j < zv.cols; ++j)
      total += h(0, j) * (std::log(h(0, j)) - std::log(sm(i, j)));
  Node n{Op::kSoftmaxKlMean, z};
  n.value = Matrix::zeros(1, 1);
  n.value(0, 0) = total / zv.rows;
  return push(std::move(n));
}

Tape::Id Tape::softmax_cross_entropy(Id logits, std::vector<int> labels) {
  const Matrix& lv = at(logits).value;
  if (static_cast<int>(labels.size()) != lv.rows)
    throw ValidationError("dimension error: cross_entropy label count");
  for (int y : labels)
    if (y < 0 || y >= lv.cols)
      throw ValidationError("cross_entropy: label out of range");
  Matrix sm = softmax_rows(lv);
  double total = 0.0;
  for (int i = 0; i < lv.rows; ++i) total -= std::log(sm(i, labels[i]));
  Node n{Op::kSoftmaxCrossEntropy, logits};
  n.labels = std::move(labels);
  n.value = Matrix::zeros(1, 1);
  n.value(0, 0) = total / lv.rows;
  return push(std::move(n));
}

const Matrix& Tape::grad(Id id) const {
  if (!swept_) throw ValidationError("tape: grad() before backward()");
  at(id);  // bounds check
  return bars_[id];
}

void Tape::backward(Id loss) {
  const Node& root = at(loss);
  if (root.value.rows != 1 || root.value.cols != 1)
    throw ValidationError("tape: backward() root must be scalar");
  if (swept_) throw ValidationError("tape: backward() called twice");
  swept_ = true;

  bars_.clear();
  bars_.reserve(nodes_.size());
  for (const Node& n : nodes_)
    bars_.push_back(Matrix::zeros(n.value.rows, n.value.cols));
  bars_[loss](0, 0) = 1.0;

  for (Id id = loss; id >= 0; --id) {
    const Node& n = nodes_[id];
    const Matrix& up = bars_[id];
    switch (n.op) {
      case Op::kConst:
      case Op::kParam:
        break;
      case Op::kMatmulNT: {
        // C = A B^T: Abar += Cbar B, Bbar += Cbar^T A.
        add_inplace(bars_[n.a], matmul(up, nodes_[n.b].value));
        add_inplace(bars_[n.b], matmul_tn(up, nodes_[n.a].value));
        break;
      }
      case Op::kMeanNeighbors: {
        Matrix& xb = bars_[n.a];
        const Graph& g = *n.graph;
        for (int i = 0; i < g.num_nodes; ++i) {
          int deg = g.degree(i);
          if (deg == 0) continue;
          double inv = 1.0 / deg;
          for (int32_t j : g.neighbors(i))
            for (int c = 0; c < up.cols; ++c) xb(j, c) += up(i, c) * inv;
        }
        break;
      }
      case Op::kMeanGroups: {
        Matrix& xb = bars_[n.a];
        const Groups& gs = *n.groups;
        for (size_t i = 0; i < gs.size(); ++i) {
          if (gs[i].empty()) continue;
          double inv = 1.0 / static_cast<double>(gs[i].size());
          for (int j : gs[i])
            for (int c = 0; c < up.cols; ++c)
              xb(j, c) += up(static_cast<int>(i), c) * inv;
        }
        break;
      }
      case Op::kRelu: {
        // Subgradient 0 at exactly 0.
        const Matrix& x = nodes_[n.a].value;
        Matrix& xb = bars_[n.a];
        for (size_t i = 0; i < x.a.size(); ++i)
          if (x.a[i] > 0.0) xb.a[i] += up.a[i];
        break;
      }
      case Op::kAdd:
        add_inplace(bars_[n.a], up);
        add_inplace(bars_[n.b], up);
        break;
      case Op::kAddRowBroadcast: {
        add_inplace(bars_[n.a], up);
        Matrix& bb = bars_[n.b];
        for (int i = 0; i < up.rows; ++i)
          for (int j = 0; j < up.cols; ++j) bb(0, j) += up(i, j);
        break;
      }
      case Op::kScale:
        axpy_inplace(bars_[n.a], n.s, up);
        break;
      case Op::kMulMask: {
        Matrix& xb = bars_[n.a];
        for (size_t i = 0; i < xb.a.size(); ++i) xb.a[i] += up.a[i] * n.aux.a[i];
        break;
      }
      case Op::kRowNormalize: {
        // y = s z with s = 1/(r + eps), r = ||z||:
        //   zbar = s u - (s^2 (u.z) / r) z   (second term vanishes at r = 0,
        //   where the map is locally linear with slope 1/eps).
        const Matrix& z = nodes_[n.a].value;
        Matrix& zb = bars_[n.a];
        for (int i = 0; i < z.rows; ++i) {
          double r = row_norm(z, i);
          double s = 1.0 / (r + kNormEps);
          double uz = 0.0;
          for (int j = 0; j < z.cols; ++j) uz += up(i, j) * z(i, j);
          for (int j = 0; j < z.cols; ++j) {
            zb(i, j) += s * up(i, j);
            if (r > 0.0) zb(i, j) -= (s * s * uz / r) * z(i, j);
          }
        }
        break;
      }
      case Op::kStopGrad:
        break;
      case Op::kConcatRows: {
        const Matrix& av = nodes_[n.a].value;
        Matrix& ab = bars_[n.a];
        Matrix& bb = bars_[n.b];
        for (size_t i = 0; i < av.a.size(); ++i) ab.a[i] += up.a[i];
        for (size_t i = 0; i < bb.a.size(); ++i)
          bb.a[i] += up.a[av.a.size() + i];
        break;
      }
      case Op::kSqDiffSum: {
        const Matrix& av = nodes_[n.a].value;
        const Matrix& bv = nodes_[n.b].value;
        double g = 2.0 * n.s * up(0, 0);
        Matrix& ab = bars_[n.a];
        Matrix& bb = bars_[n.b];
        for (size_t i = 0; i < av.a.size(); ++i) {
          double d = g * (av.a[i] - bv.a[i]);
          ab.a[i] += d;
          bb.a[i] -= d;
        }
        break;
      }
      case Op::kSoftmaxKlMean: {
        // L = mean_i KL(H || Z_i), H = softmax(mean row).  Gradient has a
        // per-row part through Z_i and a shared part through H:
        //   zbar_ij = (u/B) * [ (Z_ij - H_j) + H_j (log H_j - c_j - L) ]
        // with c_j = (1/B) sum_i log Z_ij.
        const Matrix& z = nodes_[n.a].value;
        int B = z.rows;
        Matrix meanrow = Matrix::zeros(1, z.cols);
        for (int i = 0; i < B; ++i)
          for (int j = 0; j < z.cols; ++j) meanrow(0, j) += z(i, j) / B;
        Matrix h = softmax_rows(meanrow);
        Matrix sm = softmax_rows(z);
        std::vector<double> c(z.cols, 0.0);
        for (int i = 0; i < B; ++i)
          for (int j = 0; j < z.cols; ++j) c[j] += std::log(sm(i, j)) / B;
        double L = n.value(0, 0);
        double u = up(0, 0);
        Matrix& zb = bars_[n.a];
        for (int i = 0; i < B; ++i)
          for (int j = 0; j < z.cols; ++j) {
            double shared = h(0, j) * (std::log(h(0, j)) - c[j] - L);
            zb(i, j) += (u / B) * ((sm(i, j) - h(0, j)) + shared);
          }
        break;
      }
      case Op::kSoftmaxCrossEntropy: {
        const Matrix& lv = nodes_[n.a].value;
        Matrix sm = softmax_rows(lv);
        double u = up(0, 0) / lv.rows;
        Matrix& lb = bars_[n.a];
        for (int i = 0; i < lv.rows; ++i)
          for (int j = 0; j < lv.cols; ++j)
            lb(i, j) += u * (sm(i, j) - (j == n.labels[i] ? 1.0 : 0.0));
        break;
      }
    }
  }
}

}  // namespace tasktree
