#include "hiergen/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "hiergen/random.hpp"

namespace hiergen {

HierNorm parse_hier_norm(const std::string& name) {
  if (name == "sentence") return HierNorm::kSentence;
  if (name == "global") return HierNorm::kGlobal;
  throw std::invalid_argument("unknown hierarchical normalization '" + name + "' (expected sentence or global)");
}

std::string to_string(HierNorm norm) { return norm == HierNorm::kSentence ? "sentence" : "global"; }

std::vector<Span> sentence_spans(std::span<const TokenId> source) {
  std::vector<Span> spans;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] == kNewlineId || source[i] == kEosId) {
      spans.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  if (begin < source.size()) spans.push_back({begin, source.size()});
  return spans;
}

namespace {

template <typename Real>
NodeId apply_gate(Graph<Real>& g, NodeId queries, NodeId raw_context, const GateNodes& gate, NodeId* gate_out) {
  const NodeId pre = g.add_bias(g.add(g.matmul(queries, gate.w_query), g.matmul(raw_context, gate.w_context)), gate.bias);
  const NodeId gv = g.sigmoid(pre);
  *gate_out = gv;
  return g.mul(gv, raw_context);
}

template <typename Real>
Tensor<Real> span_indicator(const std::vector<Span>& spans, std::size_t n) {
  Tensor<Real> s({spans.size(), n});
  for (std::size_t j = 0; j < spans.size(); ++j)
    for (std::size_t i = spans[j].begin; i < spans[j].end; ++i) s(j, i) = Real(1);
  return s;
}

}  // namespace

template <typename Real>
AttentionNodes gated_attention(Graph<Real>& g, NodeId queries, NodeId encodings, const GateNodes& gate) {
  if (g.value(encodings).rows() == 0) throw ShapeError("attention over zero encodings");
  AttentionNodes out;
  out.word_weights = g.softmax_rows(g.matmul(queries, encodings, true));
  const NodeId raw = g.matmul(out.word_weights, encodings);
  out.context = apply_gate(g, queries, raw, gate, &out.gate);
  return out;
}

template <typename Real>
AttentionNodes gated_self_attention(Graph<Real>& g, NodeId states, const GateNodes& gate) {
  AttentionNodes out;
  out.word_weights = g.causal_softmax_rows(g.matmul(states, states, true));
  const NodeId raw = g.matmul(out.word_weights, states);
  out.context = apply_gate(g, states, raw, gate, &out.gate);
  return out;
}

template <typename Real>
AttentionNodes hier_attention(Graph<Real>& g, NodeId queries, NodeId encodings, const std::vector<Span>& spans,
                              const GateNodes& gate, HierNorm norm) {
  const std::size_t n = g.value(encodings).rows();
  check_partition(spans, n);
  const NodeId indicator = g.constant(span_indicator<Real>(spans, n));
  const NodeId sentences = g.matmul(indicator, encodings);  // m x d, sums of word encodings
  AttentionNodes out;
  const NodeId sentence_scores = g.matmul(queries, sentences, true);
  out.sentence_weights = g.softmax_rows(sentence_scores);
  const NodeId word_scores = g.matmul(queries, encodings, true);
  if (norm == HierNorm::kSentence) {
    const NodeId expanded = g.matmul(out.sentence_weights, indicator);  // beta_{j(i)} per word
    out.word_weights = g.mul(g.segment_softmax_rows(word_scores, spans), expanded);
  } else {
    // softmax(a) * softmax(b)[j(i)], renormalized, is softmax(a + b[j(i)]);
    // the single softmax cannot underflow to an all-zero row.
    out.word_weights = g.softmax_rows(g.add(word_scores, g.matmul(sentence_scores, indicator)));
  }
  const NodeId raw = g.matmul(out.word_weights, encodings);
  out.context = apply_gate(g, queries, raw, gate, &out.gate);
  return out;
}

template <typename Real>
GateWeights<Real> GateWeights<Real>::random(std::size_t dim, std::uint64_t seed, Real scale) {
  Rng rng(seed);
  GateWeights w{Tensor<Real>({dim, dim}), Tensor<Real>({dim, dim}), Tensor<Real>({dim})};
  for (auto* t : {&w.w_query, &w.w_context, &w.bias})
    for (auto& e : t->data) e = static_cast<Real>(rng.normal()) * scale;
  return w;
}

template <typename Real>
GateNodes GateWeights<Real>::bind(Graph<Real>& g, GateWeights* grads) const {
  return {g.parameter(w_query, grads ? &grads->w_query : nullptr),
          g.parameter(w_context, grads ? &grads->w_context : nullptr),
          g.parameter(bias, grads ? &grads->bias : nullptr)};
}

// Value-level routes. These are written directly with loops and share no code
// with the graph ops above; the incremental decoder uses them.
namespace {

template <typename Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename Real>
void finish_gate(std::span<const Real> query, const GateWeights<Real>& gw, AttentionOutput<Real>& out) {
  const std::size_t d = query.size();
  out.gate.assign(d, Real(0));
  for (std::size_t j = 0; j < d; ++j) {
    Real pre = gw.bias.data[j];
    for (std::size_t i = 0; i < d; ++i) pre += query[i] * gw.w_query(i, j) + out.context[i] * gw.w_context(i, j);
    out.gate[j] = pre >= 0 ? Real(1) / (Real(1) + std::exp(-pre)) : std::exp(pre) / (Real(1) + std::exp(pre));
  }
  for (std::size_t j = 0; j < d; ++j) out.context[j] *= out.gate[j];
}

template <typename Real>
void check_query(std::span<const Real> query, const Tensor<Real>& keys, const GateWeights<Real>& gw) {
  if (keys.rank() != 2 || keys.shape[1] != query.size()) throw ShapeError("attention: key width differs from query");
  if (gw.w_query.shape != Shape{query.size(), query.size()}) throw ShapeError("attention: gate size differs from query");
}

}  // namespace

template <typename Real>
AttentionOutput<Real> gated_attention(std::span<const Real> query, const Tensor<Real>& encodings,
                                      const GateWeights<Real>& gate) {
  check_query(query, encodings, gate);
  const std::size_t n = encodings.rows(), d = query.size();
  if (n == 0) throw ShapeError("attention over zero encodings");
  AttentionOutput<Real> out;
  out.word_weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.word_weights[i] = dot(query.data(), encodings.row(i), d);
  softmax_inplace(std::span<Real>(out.word_weights));
  out.context.assign(d, Real(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) out.context[c] += out.word_weights[i] * encodings(i, c);
  finish_gate(query, gate, out);
  return out;
}

template <typename Real>
AttentionOutput<Real> gated_self_attention(const Tensor<Real>& states, std::size_t t, const GateWeights<Real>& gate) {
  if (t >= states.rows()) throw ShapeError("self-attention position past the end of the states");
  const std::size_t d = states.cols();
  std::span<const Real> query(states.row(t), d);
  check_query(query, states, gate);
  AttentionOutput<Real> out;
  out.word_weights.resize(t);
  for (std::size_t i = 0; i < t; ++i) out.word_weights[i] = dot(query.data(), states.row(i), d);
  softmax_inplace(std::span<Real>(out.word_weights));
  out.context.assign(d, Real(0));
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t c = 0; c < d; ++c) out.context[c] += out.word_weights[i] * states(i, c);
  finish_gate(query, gate, out);
  return out;
}

template <typename Real>
AttentionOutput<Real> hier_attention(std::span<const Real> query, const Tensor<Real>& encodings,
                                     const std::vector<Span>& spans, const GateWeights<Real>& gate, HierNorm norm) {
  check_query(query, encodings, gate);
  const std::size_t n = encodings.rows(), d = query.size();
  check_partition(spans, n);
  AttentionOutput<Real> out;
  std::vector<Real> sentence(d);
  out.sentence_weights.resize(spans.size());
  for (std::size_t j = 0; j < spans.size(); ++j) {
    std::fill(sentence.begin(), sentence.end(), Real(0));
    for (std::size_t i = spans[j].begin; i < spans[j].end; ++i)
      for (std::size_t c = 0; c < d; ++c) sentence[c] += encodings(i, c);
    out.sentence_weights[j] = dot(query.data(), sentence.data(), d);
  }
  const std::vector<Real> sentence_scores = out.sentence_weights;
  softmax_inplace(std::span<Real>(out.sentence_weights));

  out.word_weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.word_weights[i] = dot(query.data(), encodings.row(i), d);
  if (norm == HierNorm::kSentence) {
    for (std::size_t j = 0; j < spans.size(); ++j) {
      std::span<Real> part(out.word_weights.data() + spans[j].begin, spans[j].size());
      softmax_inplace(part);
      for (auto& w : part) w *= out.sentence_weights[j];
    }
  } else {
    for (std::size_t j = 0; j < spans.size(); ++j)
      for (std::size_t i = spans[j].begin; i < spans[j].end; ++i) out.word_weights[i] += sentence_scores[j];
    softmax_inplace(std::span<Real>(out.word_weights));
  }
  out.context.assign(d, Real(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) out.context[c] += out.word_weights[i] * encodings(i, c);
  finish_gate(query, gate, out);
  return out;
}

#define HIERGEN_INSTANTIATE(Real)                                                                              \
  template AttentionNodes gated_attention<Real>(Graph<Real>&, NodeId, NodeId, const GateNodes&);               \
  template AttentionNodes gated_self_attention<Real>(Graph<Real>&, NodeId, const GateNodes&);                  \
  template AttentionNodes hier_attention<Real>(Graph<Real>&, NodeId, NodeId, const std::vector<Span>&,        \
                                               const GateNodes&, HierNorm);                                    \
  template struct GateWeights<Real>;                                                                           \
  template AttentionOutput<Real> gated_attention<Real>(std::span<const Real>, const Tensor<Real>&,             \
                                                       const GateWeights<Real>&);                              \
  template AttentionOutput<Real> gated_self_attention<Real>(const Tensor<Real>&, std::size_t,                  \
                                                            const GateWeights<Real>&);                         \
  template AttentionOutput<Real> hier_attention<Real>(std::span<const Real>, const Tensor<Real>&,              \
                                                      const std::vector<Span>&, const GateWeights<Real>&,      \
                                                      HierNorm);

HIERGEN_INSTANTIATE(float)
HIERGEN_INSTANTIATE(double)

#undef HIERGEN_INSTANTIATE

}  // namespace hiergen
