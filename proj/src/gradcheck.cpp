#include "hiergen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hiergen/attention.hpp"
#include "hiergen/random.hpp"

namespace hiergen {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor<double>>& inputs) {
  Graph<double> g(false);
  std::vector<NodeId> ids;
  for (const auto& t : inputs) ids.push_back(g.parameter(t, nullptr));
  const double y = g.value(f(g, ids)).data.at(0);
  if (!std::isfinite(y)) throw NumericalError("gradient check: non-finite function value");
  return y;
}

// Fourth-order central stencil:
// (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h
template <typename Fn>
double central_difference(double& x, double h, Fn&& f) {
  const double saved = x;
  auto at = [&](double offset) {
    x = saved + offset;
    return f();
  };
  const double d1 = at(h) - at(-h);
  const double d2 = at(2.0 * h) - at(-2.0 * h);
  x = saved;
  return (8.0 * d1 - d2) / (12.0 * h);
}

}  // namespace

double grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs, double eps) {
  std::vector<Tensor<double>> grads;
  for (const auto& t : inputs) grads.emplace_back(t.shape);
  {
    Graph<double> g(true);
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < inputs.size(); ++i) ids.push_back(g.parameter(inputs[i], &grads[i]));
    const NodeId root = f(g, ids);
    if (!std::isfinite(g.value(root).data.at(0))) throw NumericalError("gradient check: non-finite function value");
    g.backward(root);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double numeric = central_difference(inputs[i].data[k], eps, [&] { return evaluate(f, inputs); });
      const double analytic = grads[i].data[k];
      if (!std::isfinite(analytic)) throw NumericalError("gradient check: non-finite analytic gradient");
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

double grad_check_model(const Seq2SeqModel<double>& model, const Example& example, double eps) {
  auto grads = model.zero_grads();
  {
    Graph<double> g(true);
    const NodeId root = model.build_nll(g, &grads, example);
    if (!std::isfinite(g.value(root).data.at(0))) throw NumericalError("gradient check: non-finite loss");
    g.backward(root);
  }
  Seq2SeqModel<double> probe(model.config(), model.parameters());
  auto loss = [&] {
    Graph<double> g(false);
    const double y = g.value(probe.build_nll(g, nullptr, example)).data.at(0);
    if (!std::isfinite(y)) throw NumericalError("gradient check: non-finite loss");
    return y;
  };
  double worst = 0.0;
  for (auto& [name, tensor] : probe.parameters()) {
    const auto& grad = grads.at(name);
    for (std::size_t k = 0; k < tensor.size(); ++k) {
      const double numeric = central_difference(tensor.data[k], eps, loss);
      const double analytic = grad.data[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 0.5) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

std::vector<Span> random_spans(std::size_t n, Rng& rng) {
  std::vector<Span> spans;
  std::size_t begin = 0;
  while (begin < n) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.below(n - begin));
    spans.push_back({begin, begin + len});
    begin += len;
  }
  return spans;
}

// Weighted sum of a node against a fixed random tensor, so every output
// element gets a distinct upstream gradient.
NodeId project(Graph<double>& g, NodeId x, const Tensor<double>& weights) {
  return g.sum(g.mul(x, g.constant(weights)));
}

GateNodes gate_of(std::span<const NodeId> in, std::size_t first) {
  return {in[first], in[first + 1], in[first + 2]};
}

}  // namespace

std::vector<LayerCheck> run_gradcheck_suite(std::size_t configurations, std::uint64_t seed) {
  std::vector<LayerCheck> out = {{"glu"},
                                 {"conv1d_causal"},
                                 {"gated_attention"},
                                 {"gated_self_attention"},
                                 {"hier_attention_sentence"},
                                 {"hier_attention_global"},
                                 {"model_nll"}};
  Rng rng(seed);
  auto record = [](LayerCheck& c, double err) {
    ++c.configurations;
    c.max_rel_error = std::max(c.max_rel_error, err);
  };
  for (std::size_t cfg = 0; cfg < configurations; ++cfg) {
    const std::size_t t = 1 + rng.below(4);
    const std::size_t n = 1 + rng.below(5);
    const std::size_t d = 1 + rng.below(4);
    const std::size_t w = 1 + rng.below(3);

    {
      const auto r = random_tensor({t, d}, rng);
      record(out[0], grad_check([&](Graph<double>& g, std::span<const NodeId> in) { return project(g, g.glu(in[0]), r); },
                                {random_tensor({t, 2 * d}, rng)}));
    }
    {
      const std::size_t dout = 1 + rng.below(4);
      const auto r = random_tensor({t, dout}, rng);
      record(out[1], grad_check(
                         [&](Graph<double>& g, std::span<const NodeId> in) {
                           return project(g, g.conv1d(in[0], in[1], in[2], w - 1, 0), r);
                         },
                         {random_tensor({t, d}, rng), random_tensor({w, d, dout}, rng), random_tensor({dout}, rng)}));
    }
    auto gate_inputs = [&](std::vector<Tensor<double>> v) {
      v.push_back(random_tensor({d, d}, rng));
      v.push_back(random_tensor({d, d}, rng));
      v.push_back(random_tensor({d}, rng));
      return v;
    };
    {
      const auto r = random_tensor({t, d}, rng);
      record(out[2], grad_check(
                         [&](Graph<double>& g, std::span<const NodeId> in) {
                           return project(g, gated_attention(g, in[0], in[1], gate_of(in, 2)).context, r);
                         },
                         gate_inputs({random_tensor({t, d}, rng), random_tensor({n, d}, rng)})));
    }
    {
      const auto r = random_tensor({t, d}, rng);
      record(out[3], grad_check(
                         [&](Graph<double>& g, std::span<const NodeId> in) {
                           return project(g, gated_self_attention(g, in[0], gate_of(in, 1)).context, r);
                         },
                         gate_inputs({random_tensor({t, d}, rng)})));
    }
    for (int k = 0; k < 2; ++k) {
      const HierNorm norm = k == 0 ? HierNorm::kSentence : HierNorm::kGlobal;
      const auto spans = random_spans(n, rng);
      const auto r = random_tensor({t, d}, rng);
      record(out[4 + k], grad_check(
                             [&](Graph<double>& g, std::span<const NodeId> in) {
                               return project(g, hier_attention(g, in[0], in[1], spans, gate_of(in, 2), norm).context, r);
                             },
                             gate_inputs({random_tensor({t, d}, rng), random_tensor({n, d}, rng)})));
    }
    {
      ModelConfig mc;
      mc.source_vocab = 7;
      mc.target_vocab = 7;
      mc.embed_dim = 1 + rng.below(3);
      mc.hidden_dim = 1 + rng.below(3);
      mc.kernel_width = w;
      mc.encoder_blocks = 1 + rng.below(2);
      mc.decoder_blocks = 1 + rng.below(2);
      mc.attention = cfg % 2 ? AttentionKind::kHierarchical : AttentionKind::kFlat;
      mc.hier_norm = cfg % 4 == 3 ? HierNorm::kGlobal : HierNorm::kSentence;
      mc.self_attention = rng.below(2) == 0;
      mc.max_positions = 8;
      mc.seed = rng.next();
      // Generic parameter values rather than the small initial ones, so that
      // few gradient entries sit near the finite-difference noise floor.
      Seq2SeqModel<double> model(mc);
      for (auto& [name, t] : model.parameters())
        for (auto& v : t.data) v = 0.5 * rng.normal();
      Example ex;
      const std::size_t src_len = 1 + rng.below(5);
      for (std::size_t i = 0; i < src_len; ++i) ex.source.push_back(static_cast<TokenId>(rng.below(7)));
      ex.source.push_back(kEosId);
      const std::size_t tgt_len = rng.below(4);
      for (std::size_t i = 0; i < tgt_len; ++i) ex.target.push_back(static_cast<TokenId>(rng.below(7)));
      ex.target.push_back(kEosId);
      record(out[6], grad_check_model(model, ex));
    }
  }
  return out;
}

}  // namespace hiergen
