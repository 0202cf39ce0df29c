#pragma once

#include <memory>
#include <vector>

#include "tasktree/graph.hpp"
#include "tasktree/matrix.hpp"

namespace tasktree {

// Small reverse-mode tape over Matrix values.  Nodes are evaluated eagerly at
// creation time; backward() fills per-node adjoints in one reverse sweep.
// The op set is exactly what the training losses need -- nothing generic.
//
// Callers must keep any Graph passed to mean_neighbors alive for the tape's
// lifetime.  Groups are shared_ptrs so sampled neighborhoods and task root
// sets can be built once and reused across nodes.
class Tape {
 public:
  using Id = int;
  using Groups = std::vector<std::vector<int>>;

  // Leaves.  param() keeps a pointer to the caller's storage so optimizers
  // can map gradients back to their parameters.
  Id param(Matrix* storage);
  Id constant(Matrix value);

  // C = A * B^T.  Weight matrices are stored output-dim x input-dim, so a
  // row-major batch is transformed by one matmul_nt per weight.
  Id matmul_nt(Id a, Id b);

  Id mean_neighbors(Id x, const Graph* g);
  // Row i of the output is the mean of x's rows listed in (*groups)[i];
  // empty group -> zero row.  Used for sampled neighborhoods and for task
  // embeddings (mean over task-relevant roots).
  Id mean_groups(Id x, std::shared_ptr<const Groups> groups);

  Id relu(Id a);
  Id add(Id a, Id b);
  Id add_row_broadcast(Id a, Id bias);  // bias is 1 x cols
  Id scale(Id a, double s);
  Id mul_mask(Id a, Matrix mask);  // elementwise; mask is constant (dropout)
  Id row_normalize(Id a);          // rho(z) = z / (||z|| + eps), per row
  Id stop_grad(Id a);
  Id concat_rows(Id a, Id b);

  // Scalar outputs (1x1).
  Id sq_diff_sum(Id a, Id b, double s);             // s * sum_ij (a-b)^2
  Id softmax_kl_mean(Id z);                         // mean_i KL(H || softmax(z_i))
  Id softmax_cross_entropy(Id logits, std::vector<int> labels);  // mean over rows

  const Matrix& value(Id id) const;
  // Reverse sweep from a scalar node; adjoints retrievable via grad().
  void backward(Id loss);
  const Matrix& grad(Id id) const;
  Matrix* param_storage(Id id) const;  // nullptr for non-param nodes

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op {
    kConst, kParam, kMatmulNT, kMeanNeighbors, kMeanGroups, kRelu, kAdd,
    kAddRowBroadcast, kScale, kMulMask, kRowNormalize, kStopGrad,
    kConcatRows, kSqDiffSum, kSoftmaxKlMean, kSoftmaxCrossEntropy,
  };
  struct Node {
    Op op;
    int a = -1, b = -1;
    Matrix value;
    Matrix aux;               // dropout mask
    double s = 1.0;           // scale factor
    const Graph* graph = nullptr;
    std::shared_ptr<const Groups> groups;
    std::vector<int> labels;
    Matrix* param = nullptr;
  };

  Id push(Node n);
  const Node& at(Id id) const;

  std::vector<Node> nodes_;
  std::vector<Matrix> bars_;
  bool swept_ = false;
};

// Row-wise softmax with max-subtraction; shared by the tape and the
// value-level evaluation code.
Matrix softmax_rows(const Matrix& z);

}  // namespace tasktree
