#pragma once

#include <cstddef>
#include <vector>

#include "adebias/tensor.hpp"

namespace adebias {

// Backward-pass scaling of a gradient-reversal node. Forward is the identity;
// the gradient flowing into the input is -scale times the upstream gradient.
struct ReversalCoefficient {
  double scale;
  explicit ReversalCoefficient(double s);
};

using NodeId = std::size_t;

// Reverse-mode autodiff over a dynamically built graph of dense tensors.
// A graph is built per step (define-by-run), confined to one thread, and
// traversed once by backward() in reverse insertion order. Gradients
// accumulate additively across fan-out.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves: parameters (requires_grad) and constants/inputs.
  NodeId leaf(Tensor value, bool requires_grad = false);

  // [m x n]*[n x p] -> [m x p]; also [m x n]*[n] -> [m] and [n]*[n x p] -> [p].
  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId elementwise_mul(NodeId a, NodeId b);
  NodeId tanh(NodeId x);

  // Concatenates along the last axis. Rank-2 inputs must share a row count.
  NodeId concat(const std::vector<NodeId>& xs);

  NodeId mean(NodeId x);  // -> scalar
  NodeId sum(NodeId x);   // -> scalar

  // Elementwise max over equal-shape steps; ties go to the lowest time index.
  NodeId max_over_time(const std::vector<NodeId>& steps);

  // Stacks rank-1 [k] vectors into a [B x k] matrix.
  NodeId stack_rows(const std::vector<NodeId>& rows);

  // Adds a rank-1 bias to every row of a rank-2 matrix.
  NodeId add_rows(NodeId m, NodeId bias);

  // Multiplies by a fixed constant (not a graph input).
  NodeId scale(NodeId x, double c);

  // -log softmax(logits)[label]; logits rank-1 of length 3, label in {0,1,2}.
  NodeId softmax_cross_entropy(NodeId logits, int label);

  // Row-wise cross entropy: [B x C] logits, B labels -> [B] losses.
  NodeId softmax_cross_entropy_rows(NodeId logits, std::vector<int> labels);

  // Identity forward; backward multiplies the upstream gradient by -c.scale.
  NodeId grad_reverse(NodeId x, ReversalCoefficient c);

  // Mean of the embedding rows selected by each sequence -> [B x d].
  // Gradients scatter back into the table rows.
  NodeId embed_mean(NodeId table, std::vector<std::vector<int>> seqs);

  // Single embedding row -> [d].
  NodeId embed_row(NodeId table, int token);

  // Accumulates d(loss)/d(node) into every reachable node that wants a
  // gradient; loss must be scalar. Safe to call repeatedly (accumulates).
  void backward(NodeId loss);
  void zero_grad();

  const Tensor& value(NodeId id) const;
  // Gradient accumulator; zeros for nodes backward never reached.
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf, kMatmul, kAdd, kSub, kMul, kTanh, kConcat, kMean, kSum,
    kMaxOverTime, kStackRows, kAddRows, kScale, kSceRows, kGradReverse,
    kEmbedMean, kEmbedRow,
  };

  struct Node {
    Op op;
    std::vector<NodeId> parents;
    Tensor value;
    mutable Tensor grad;  // materialized lazily
    bool needs_grad = false;
    double coeff = 0.0;                   // kScale, kGradReverse
    std::vector<int> labels;              // kSceRows, kEmbedRow (token)
    std::vector<std::vector<int>> seqs;   // kEmbedMean
  };

  NodeId push(Node n);
  Tensor& grad_buffer(NodeId id);
  void backprop_node(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace adebias
