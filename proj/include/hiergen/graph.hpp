#pragma once

// Tape-based reverse-mode differentiation over the handful of layer
// primitives the sequence models use. A graph records nodes in creation
// order; backward() walks the tape in reverse. Parameters are referenced,
// not copied, and their gradients accumulate into caller-owned tensors.
//
// A graph is single-writer. Build one graph per example when running in
// parallel.

#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "hiergen/tensor.hpp"
#include "hiergen/vocab.hpp"

namespace hiergen {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

template <typename Real>
class Graph {
 public:
  // With record == false no backward closures are kept (inference only).
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId constant(Tensor<Real> value);
  // `value` must outlive the graph. `grad` may be null.
  NodeId parameter(const Tensor<Real>& value, Tensor<Real>* grad);

  const Tensor<Real>& value(NodeId id) const;
  // Valid after backward(); empty for nodes that do not need gradients.
  const std::vector<Real>& grad(NodeId id) const { return nodes_.at(id).grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 for a single-element root and propagates.
  void backward(NodeId root);

  NodeId add(NodeId a, NodeId b);
  // x: rows x cols, bias: cols.
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId scale(NodeId x, Real factor);
  NodeId mul(NodeId a, NodeId b);
  // a: n x k times b: k x m, or b: m x k when transpose_b.
  NodeId matmul(NodeId a, NodeId b, bool transpose_b = false);
  NodeId sigmoid(NodeId x);
  // Last dimension 2d -> d: first half times sigmoid of second half.
  NodeId glu(NodeId x);
  // x: L x d_in, kernel: w x d_in x d_out, bias: d_out. The input is padded
  // with zero frames on each side; output length is L + left + right - w + 1.
  NodeId conv1d(NodeId x, NodeId kernel, NodeId bias, std::size_t left_pad, std::size_t right_pad);
  // Gathers rows of `table` (V x d). Throws InvalidId.
  NodeId embedding(NodeId table, std::span<const TokenId> ids);
  NodeId softmax_rows(NodeId x);
  // Row t is a softmax over columns < t; row 0 is all zeros.
  NodeId causal_softmax_rows(NodeId x);
  // Independent softmax within each span of every row.
  NodeId segment_softmax_rows(NodeId x, std::vector<Span> spans);
  // Divides each row by its sum.
  NodeId normalize_rows(NodeId x);
  // Sum over rows of -ln softmax(logits[r])[targets[r]]. Throws InvalidId.
  NodeId cross_entropy(NodeId logits, std::span<const TokenId> targets);
  NodeId sum(NodeId x);

 private:
  struct Node {
    Tensor<Real> owned;
    const Tensor<Real>* ref = nullptr;
    Tensor<Real>* param_grad = nullptr;
    std::vector<Real> grad;
    std::function<void()> backward;
    bool needs_grad = false;
  };

  NodeId push(Tensor<Real> value, bool needs_grad);
  bool needs(NodeId id) const { return nodes_[id].needs_grad; }
  std::vector<Real>& g(NodeId id) { return nodes_[id].grad; }
  const Tensor<Real>& v(NodeId id) const { return value(id); }
  void on_backward(NodeId out, std::function<void()> fn);

  std::vector<Node> nodes_;
  bool record_;
};

extern template class Graph<float>;
extern template class Graph<double>;

// Max-subtracted softmax of one vector.
template <typename Real>
void softmax_inplace(std::span<Real> values);
template <typename Real>
Real log_sum_exp(std::span<const Real> values);

}  // namespace hiergen
