#pragma once

// Gated dot-product attention in three flavours: flat attention over encoder
// states, causally masked self-attention over prior decoder states, and
// hierarchical attention whose word weight is the product of a sentence
// weight and a within-sentence word weight. Sentence vectors are sums of
// their word encodings. Scores are plain (unscaled) dot products.
//
// Every flavour shares one gate: g = sigmoid(h W_q + c W_c + b) and the
// returned context is g * c.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hiergen/graph.hpp"

namespace hiergen {

enum class HierNorm {
  kSentence,  // word weights normalized within each sentence, then multiplied
  kGlobal,    // word weights normalized over all words, multiplied, renormalized
};

HierNorm parse_hier_norm(const std::string& name);
std::string to_string(HierNorm norm);

struct GateNodes {
  NodeId w_query = kNoNode;    // d x d
  NodeId w_context = kNoNode;  // d x d
  NodeId bias = kNoNode;       // d
};

struct AttentionNodes {
  NodeId context = kNoNode;           // T x d, gated
  NodeId word_weights = kNoNode;      // T x n
  NodeId sentence_weights = kNoNode;  // T x m, hierarchical only
  NodeId gate = kNoNode;              // T x d
};

// queries: T x d, encodings: n x d (n >= 1).
template <typename Real>
AttentionNodes gated_attention(Graph<Real>& g, NodeId queries, NodeId encodings, const GateNodes& gate);

// states: T x d; row t attends to rows < t, row 0 gets a zero context.
template <typename Real>
AttentionNodes gated_self_attention(Graph<Real>& g, NodeId states, const GateNodes& gate);

// `spans` must tile [0, n) with non-empty sentences.
template <typename Real>
AttentionNodes hier_attention(Graph<Real>& g, NodeId queries, NodeId encodings, const std::vector<Span>& spans,
                              const GateNodes& gate, HierNorm norm = HierNorm::kSentence);

template <typename Real>
struct GateWeights {
  Tensor<Real> w_query;
  Tensor<Real> w_context;
  Tensor<Real> bias;

  static GateWeights random(std::size_t dim, std::uint64_t seed, Real scale = Real(0.5));
  GateNodes bind(Graph<Real>& g, GateWeights* grads = nullptr) const;
};

// Single-query results with plain vectors.
template <typename Real>
struct AttentionOutput {
  std::vector<Real> context;
  std::vector<Real> word_weights;
  std::vector<Real> sentence_weights;  // empty for flat attention
  std::vector<Real> gate;
};

template <typename Real>
AttentionOutput<Real> gated_attention(std::span<const Real> query, const Tensor<Real>& encodings,
                                      const GateWeights<Real>& gate);

// Query is states[t], attending over states[0, t).
template <typename Real>
AttentionOutput<Real> gated_self_attention(const Tensor<Real>& states, std::size_t t, const GateWeights<Real>& gate);

template <typename Real>
AttentionOutput<Real> hier_attention(std::span<const Real> query, const Tensor<Real>& encodings,
                                     const std::vector<Span>& spans, const GateWeights<Real>& gate,
                                     HierNorm norm = HierNorm::kSentence);

// Splits a source row after each "newline" or "eos" id; trailing tokens form
// a final span.
std::vector<Span> sentence_spans(std::span<const TokenId> source);

}  // namespace hiergen
