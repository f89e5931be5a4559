#include "hiergen/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hiergen/random.hpp"

namespace hiergen {

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "flat") return AttentionKind::kFlat;
  if (name == "hierarchical" || name == "hier") return AttentionKind::kHierarchical;
  throw std::invalid_argument("unknown attention kind '" + name + "' (expected flat or hierarchical)");
}

std::string to_string(AttentionKind kind) { return kind == AttentionKind::kFlat ? "flat" : "hierarchical"; }

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("model config: ") + name + " must be >= 1");
  };
  positive(source_vocab, "source_vocab");
  positive(target_vocab, "target_vocab");
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(encoder_blocks, "encoder_blocks");
  positive(decoder_blocks, "decoder_blocks");
  positive(kernel_width, "kernel_width");
  positive(max_positions, "max_positions");
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "source_vocab=" << source_vocab << '\n'
      << "target_vocab=" << target_vocab << '\n'
      << "embed_dim=" << embed_dim << '\n'
      << "hidden_dim=" << hidden_dim << '\n'
      << "encoder_blocks=" << encoder_blocks << '\n'
      << "decoder_blocks=" << decoder_blocks << '\n'
      << "kernel_width=" << kernel_width << '\n'
      << "attention=" << to_string(attention) << '\n'
      << "hier_norm=" << to_string(hier_norm) << '\n'
      << "self_attention=" << (self_attention ? 1 : 0) << '\n'
      << "max_positions=" << max_positions << '\n'
      << "seed=" << seed << '\n';
  return out.str();
}

void ModelConfig::apply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("config line without '=': " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    auto num = [&] {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument("config: bad number for " + key + ": " + value);
      return static_cast<std::size_t>(v);
    };
    if (key == "source_vocab") source_vocab = num();
    else if (key == "target_vocab") target_vocab = num();
    else if (key == "embed_dim") embed_dim = num();
    else if (key == "hidden_dim") hidden_dim = num();
    else if (key == "encoder_blocks") encoder_blocks = num();
    else if (key == "decoder_blocks") decoder_blocks = num();
    else if (key == "kernel_width") kernel_width = num();
    else if (key == "attention") attention = parse_attention_kind(value);
    else if (key == "hier_norm") hier_norm = parse_hier_norm(value);
    else if (key == "self_attention") self_attention = num() != 0;
    else if (key == "max_positions") max_positions = num();
    else if (key == "seed") seed = num();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  c.apply(text);
  return c;
}

std::vector<TokenId> shift_right(std::span<const TokenId> target) {
  std::vector<TokenId> out;
  out.reserve(target.size());
  if (target.empty()) return out;
  out.push_back(kEosId);
  out.insert(out.end(), target.begin(), target.end() - 1);
  return out;
}

namespace {

constexpr double kResidualScale = 0.70710678118654752440;

std::string block(const char* side, std::size_t i, const char* leaf) {
  return std::string(side) + ".block" + std::to_string(i) + "." + leaf;
}

double init_std(const std::string& name, const ModelConfig& c) {
  auto ends_with = [&](std::string_view s) {
    return name.size() >= s.size() && std::string_view(name).substr(name.size() - s.size()) == s;
  };
  if (ends_with(".b")) return 0.0;
  if (ends_with("embed") || ends_with("pos")) return 0.1;
  if (ends_with("in.w")) return 1.0 / std::sqrt(static_cast<double>(c.embed_dim));
  if (ends_with("conv.w")) return 1.0 / std::sqrt(static_cast<double>(c.kernel_width * c.hidden_dim));
  return 1.0 / std::sqrt(static_cast<double>(c.hidden_dim));
}

}  // namespace

template <typename Real>
std::map<std::string, Shape> Seq2SeqModel<Real>::expected_shapes() const {
  const auto& c = config_;
  const std::size_t h = c.hidden_dim, e = c.embed_dim;
  std::map<std::string, Shape> s;
  s["enc.embed"] = {c.source_vocab, e};
  s["enc.pos"] = {c.max_positions, e};
  s["enc.in.w"] = {e, h};
  s["enc.in.b"] = {h};
  for (std::size_t i = 0; i < c.encoder_blocks; ++i) {
    s[block("enc", i, "conv.w")] = {c.kernel_width, h, 2 * h};
    s[block("enc", i, "conv.b")] = {2 * h};
  }
  s["dec.embed"] = {c.target_vocab, e};
  s["dec.pos"] = {c.max_positions, e};
  s["dec.in.w"] = {e, h};
  s["dec.in.b"] = {h};
  for (std::size_t i = 0; i < c.decoder_blocks; ++i) {
    s[block("dec", i, "conv.w")] = {c.kernel_width, h, 2 * h};
    s[block("dec", i, "conv.b")] = {2 * h};
    if (c.self_attention) {
      s[block("dec", i, "self.wq")] = {h, h};
      s[block("dec", i, "self.wc")] = {h, h};
      s[block("dec", i, "self.b")] = {h};
    }
    s[block("dec", i, "attn.wq")] = {h, h};
    s[block("dec", i, "attn.wc")] = {h, h};
    s[block("dec", i, "attn.b")] = {h};
  }
  s["dec.out.w"] = {h, c.target_vocab};
  s["dec.out.b"] = {c.target_vocab};
  return s;
}

template <typename Real>
Seq2SeqModel<Real>::Seq2SeqModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.seed);
  for (const auto& [name, shape] : expected_shapes()) {
    Tensor<Real> t(shape);
    const double sd = init_std(name, config_);
    if (sd > 0)
      for (auto& v : t.data) v = static_cast<Real>(rng.normal() * sd);
    params_.emplace(name, std::move(t));
  }
}

template <typename Real>
Seq2SeqModel<Real>::Seq2SeqModel(ModelConfig config, ParamMap<Real> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto shapes = expected_shapes();
  if (shapes.size() != params_.size())
    throw ShapeError("expected " + std::to_string(shapes.size()) + " parameters, got " + std::to_string(params_.size()));
  for (const auto& [name, shape] : shapes) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ShapeError("missing parameter " + name);
    if (it->second.shape != shape)
      throw ShapeError("parameter " + name + " has shape " + shape_string(it->second.shape) + ", expected " +
                       shape_string(shape));
  }
}

template <typename Real>
ParamMap<Real> Seq2SeqModel<Real>::zero_grads() const {
  ParamMap<Real> grads;
  for (const auto& [name, t] : params_) grads.emplace(name, Tensor<Real>(t.shape));
  return grads;
}

template <typename Real>
std::size_t Seq2SeqModel<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

template <typename Real>
NodeId Seq2SeqModel<Real>::param(Graph<Real>& g, ParamMap<Real>* grads, const std::string& name) const {
  return g.parameter(params_.at(name), grads ? &grads->at(name) : nullptr);
}

template <typename Real>
void Seq2SeqModel<Real>::check_ids(std::span<const TokenId> ids, std::size_t vocab, const char* what) const {
  if (ids.empty()) throw ShapeError(std::string(what) + " sequence is empty");
  if (ids.size() > config_.max_positions)
    throw ShapeError(std::string(what) + " length " + std::to_string(ids.size()) + " exceeds max_positions " +
                     std::to_string(config_.max_positions));
  for (auto id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw InvalidId(std::string(what) + " id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(vocab));
}

template <typename Real>
std::vector<Span> Seq2SeqModel<Real>::spans_for(std::span<const TokenId> source) const {
  return sentence_spans(source);
}

namespace {

std::vector<TokenId> positions(std::size_t n) {
  std::vector<TokenId> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<TokenId>(i);
  return p;
}

}  // namespace

template <typename Real>
NodeId Seq2SeqModel<Real>::build_encoder(Graph<Real>& g, ParamMap<Real>* grads, std::span<const TokenId> source) const {
  check_ids(source, config_.source_vocab, "source");
  const auto pos = positions(source.size());
  const NodeId x = g.add(g.embedding(param(g, grads, "enc.embed"), source), g.embedding(param(g, grads, "enc.pos"), pos));
  NodeId h = g.add_bias(g.matmul(x, param(g, grads, "enc.in.w")), param(g, grads, "enc.in.b"));
  const std::size_t left = (config_.kernel_width - 1) / 2;
  const std::size_t right = config_.kernel_width - 1 - left;
  for (std::size_t i = 0; i < config_.encoder_blocks; ++i) {
    const NodeId y = g.glu(g.conv1d(h, param(g, grads, block("enc", i, "conv.w")),
                                    param(g, grads, block("enc", i, "conv.b")), left, right));
    h = g.scale(g.add(h, y), static_cast<Real>(kResidualScale));
  }
  return h;
}

template <typename Real>
NodeId Seq2SeqModel<Real>::build_logits(Graph<Real>& g, ParamMap<Real>* grads, std::span<const TokenId> source,
                                        std::span<const TokenId> decoder_input) const {
  const NodeId enc = build_encoder(g, grads, source);
  check_ids(decoder_input, config_.target_vocab, "target");
  const auto spans = spans_for(source);
  const auto pos = positions(decoder_input.size());
  const NodeId x =
      g.add(g.embedding(param(g, grads, "dec.embed"), decoder_input), g.embedding(param(g, grads, "dec.pos"), pos));
  NodeId h = g.add_bias(g.matmul(x, param(g, grads, "dec.in.w")), param(g, grads, "dec.in.b"));
  const auto s = static_cast<Real>(kResidualScale);
  for (std::size_t i = 0; i < config_.decoder_blocks; ++i) {
    const NodeId y = g.glu(g.conv1d(h, param(g, grads, block("dec", i, "conv.w")),
                                    param(g, grads, block("dec", i, "conv.b")), config_.kernel_width - 1, 0));
    h = g.scale(g.add(h, y), s);
    if (config_.self_attention) {
      const GateNodes gate{param(g, grads, block("dec", i, "self.wq")), param(g, grads, block("dec", i, "self.wc")),
                           param(g, grads, block("dec", i, "self.b"))};
      h = g.scale(g.add(h, gated_self_attention(g, h, gate).context), s);
    }
    const GateNodes gate{param(g, grads, block("dec", i, "attn.wq")), param(g, grads, block("dec", i, "attn.wc")),
                         param(g, grads, block("dec", i, "attn.b"))};
    const AttentionNodes att = config_.attention == AttentionKind::kFlat
                                   ? gated_attention(g, h, enc, gate)
                                   : hier_attention(g, h, enc, spans, gate, config_.hier_norm);
    h = g.scale(g.add(h, att.context), s);
  }
  return g.add_bias(g.matmul(h, param(g, grads, "dec.out.w")), param(g, grads, "dec.out.b"));
}

template <typename Real>
NodeId Seq2SeqModel<Real>::build_nll(Graph<Real>& g, ParamMap<Real>* grads, const Example& example) const {
  const auto input = shift_right(example.target);
  const NodeId logits = build_logits(g, grads, example.source, input);
  return g.cross_entropy(logits, example.target);
}

template <typename Real>
Tensor<Real> Seq2SeqModel<Real>::logits(std::span<const TokenId> source, std::span<const TokenId> decoder_input) const {
  Graph<Real> g(false);
  return g.value(build_logits(g, nullptr, source, decoder_input));
}

template <typename Real>
std::vector<Real> Seq2SeqModel<Real>::token_logprobs(std::span<const TokenId> source,
                                                     std::span<const TokenId> target) const {
  const auto input = shift_right(target);
  const Tensor<Real> l = logits(source, input);
  const std::size_t v = l.cols();
  std::vector<Real> out(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    std::span<const Real> row(l.row(t), v);
    out[t] = row[static_cast<std::size_t>(target[t])] - log_sum_exp(row);
  }
  return out;
}

template <typename Real>
IncrementalDecoder<Real> Seq2SeqModel<Real>::start_decoding(std::span<const TokenId> source) const {
  return IncrementalDecoder<Real>(*this, source);
}

// ---------------------------------------------------------------------------

template <typename Real>
GateWeights<Real> IncrementalDecoder<Real>::gate(const std::string& prefix) const {
  const auto& p = model_->params_;
  return {p.at(prefix + "wq"), p.at(prefix + "wc"), p.at(prefix + "b")};
}

template <typename Real>
IncrementalDecoder<Real>::IncrementalDecoder(const Seq2SeqModel<Real>& model, std::span<const TokenId> source)
    : model_(&model) {
  Graph<Real> g(false);
  encodings_ = g.value(model.build_encoder(g, nullptr, source));
  spans_ = model.spans_for(source);
  const auto& c = model.config();
  blocks_.resize(c.decoder_blocks);
  for (std::size_t i = 0; i < c.decoder_blocks; ++i) {
    if (c.self_attention) {
      self_gates_.push_back(gate(block("dec", i, "self.")));
      blocks_[i].self_states = Tensor<Real>({c.max_positions, c.hidden_dim});
    }
    attn_gates_.push_back(gate(block("dec", i, "attn.")));
  }
}

template <typename Real>
std::vector<Real> IncrementalDecoder<Real>::linear(std::span<const Real> x, const std::string& prefix) const {
  const auto& w = model_->params_.at(prefix + ".w");
  const auto& b = model_->params_.at(prefix + ".b");
  const std::size_t out_dim = w.shape[1];
  std::vector<Real> out(out_dim, Real(0));
  for (std::size_t p = 0; p < x.size(); ++p) {
    const Real xv = x[p];
    if (xv == Real(0)) continue;
    const Real* wrow = w.row(p);
    for (std::size_t j = 0; j < out_dim; ++j) out[j] += xv * wrow[j];
  }
  for (std::size_t j = 0; j < out_dim; ++j) out[j] += b.data[j];
  return out;
}

namespace {

template <typename Real>
void residual(std::vector<Real>& h, const std::vector<Real>& y) {
  const auto s = static_cast<Real>(kResidualScale);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = (h[i] + y[i]) * s;
}

template <typename Real>
Real sigmoid_value(Real x) {
  return x >= 0 ? Real(1) / (Real(1) + std::exp(-x)) : std::exp(x) / (Real(1) + std::exp(x));
}

}  // namespace

template <typename Real>
std::vector<Real> IncrementalDecoder<Real>::step(TokenId input) {
  const auto& c = model_->config();
  const auto& p = model_->params_;
  if (position_ >= c.max_positions) throw ShapeError("decoder ran past max_positions");
  if (input < 0 || static_cast<std::size_t>(input) >= c.target_vocab)
    throw InvalidId("decoder input id " + std::to_string(input) + " outside target vocabulary");
  const std::size_t e = c.embed_dim, hdim = c.hidden_dim, width = c.kernel_width;

  std::vector<Real> x(e);
  const auto& embed = p.at("dec.embed");
  const auto& pos = p.at("dec.pos");
  for (std::size_t i = 0; i < e; ++i)
    x[i] = embed(static_cast<std::size_t>(input), i) + pos(position_, i);
  std::vector<Real> h = linear(x, "dec.in");

  for (std::size_t b = 0; b < c.decoder_blocks; ++b) {
    auto& st = blocks_[b];
    st.conv_inputs.push_back(h);
    if (st.conv_inputs.size() > width) st.conv_inputs.erase(st.conv_inputs.begin());

    const auto& kernel = p.at(block("dec", b, "conv.w"));
    const auto& bias = p.at(block("dec", b, "conv.b"));
    std::vector<Real> conv(bias.data.begin(), bias.data.end());
    // Kernel tap k sees input position t + k - (width - 1).
    const std::size_t have = st.conv_inputs.size();
    for (std::size_t k = 0; k < width; ++k) {
      if (k + have < width) continue;
      const auto& row = st.conv_inputs[k + have - width];
      const Real* wk = kernel.data.data() + k * hdim * 2 * hdim;
      for (std::size_t i = 0; i < hdim; ++i) {
        const Real* wrow = wk + i * 2 * hdim;
        for (std::size_t o = 0; o < 2 * hdim; ++o) conv[o] += row[i] * wrow[o];
      }
    }
    std::vector<Real> y(hdim);
    for (std::size_t i = 0; i < hdim; ++i) y[i] = conv[i] * sigmoid_value(conv[hdim + i]);
    residual(h, y);

    if (c.self_attention) {
      std::copy(h.begin(), h.end(), st.self_states.row(st.self_count));
      // The states tensor is sized for max_positions; only the first
      // self_count + 1 rows are live.
      Tensor<Real> live({st.self_count + 1, hdim},
                        std::vector<Real>(st.self_states.data.begin(),
                                          st.self_states.data.begin() + static_cast<std::ptrdiff_t>((st.self_count + 1) * hdim)));
      const auto att = gated_self_attention(live, st.self_count, self_gates_[b]);
      ++st.self_count;
      residual(h, att.context);
    }

    const auto att = c.attention == AttentionKind::kFlat
                         ? gated_attention(std::span<const Real>(h), encodings_, attn_gates_[b])
                         : hier_attention(std::span<const Real>(h), encodings_, spans_, attn_gates_[b], c.hier_norm);
    residual(h, att.context);
  }
  ++position_;
  return linear(h, "dec.out");
}

// ---------------------------------------------------------------------------

Batch Batch::from_examples(std::span<const Example> examples) {
  Batch b;
  b.rows = examples.size();
  for (const auto& e : examples) {
    b.source_len = std::max(b.source_len, e.source.size());
    b.target_len = std::max(b.target_len, e.target.size());
  }
  b.source.assign(b.rows * b.source_len, kPadId);
  b.target.assign(b.rows * b.target_len, kPadId);
  b.mask.assign(b.rows * b.target_len, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const auto& e = examples[r];
    std::copy(e.source.begin(), e.source.end(), b.source.begin() + static_cast<std::ptrdiff_t>(r * b.source_len));
    std::copy(e.target.begin(), e.target.end(), b.target.begin() + static_cast<std::ptrdiff_t>(r * b.target_len));
    std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(r * b.target_len), e.target.size(), 1);
    b.spans.push_back(sentence_spans(e.source));
  }
  return b;
}

std::vector<TokenId> Batch::source_row(std::size_t r) const {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < source_len; ++i) {
    const TokenId id = source[r * source_len + i];
    if (id == kPadId) break;
    out.push_back(id);
  }
  return out;
}

std::vector<TokenId> Batch::target_row(std::size_t r) const {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < target_len; ++i)
    if (mask[r * target_len + i]) out.push_back(target[r * target_len + i]);
  return out;
}

template <typename Real>
Tensor<Real> forward(const Seq2SeqModel<Real>& model, const Batch& batch) {
  const std::size_t v = model.config().target_vocab;
  Tensor<Real> out({batch.rows, batch.target_len, v});
  for (std::size_t r = 0; r < batch.rows; ++r) {
    const auto src = batch.source_row(r);
    const auto tgt = batch.target_row(r);
    if (tgt.empty()) continue;
    const auto l = model.logits(src, shift_right(tgt));
    std::copy(l.data.begin(), l.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * batch.target_len * v));
  }
  return out;
}

template <typename Real>
double nll_loss(const Tensor<Real>& logits, std::span<const TokenId> targets, std::span<const std::uint8_t> mask) {
  if (logits.rank() < 2) throw ShapeError("nll_loss: logits need a vocabulary dimension");
  const std::size_t v = logits.shape.back();
  const std::size_t positions = logits.size() / v;
  if (targets.size() != positions || mask.size() != positions)
    throw ShapeError("nll_loss: targets/mask do not match logits positions");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < positions; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v)
      throw InvalidId("nll_loss: target id outside vocabulary");
    std::span<const Real> row(logits.data.data() + i * v, v);
    total += static_cast<double>(log_sum_exp(row) - row[static_cast<std::size_t>(targets[i])]);
    ++count;
  }
  if (count == 0) throw EmptyBatch("every target position is padding");
  return total / static_cast<double>(count);
}

template class Seq2SeqModel<float>;
template class Seq2SeqModel<double>;
template class IncrementalDecoder<float>;
template class IncrementalDecoder<double>;
template Tensor<float> forward<float>(const Seq2SeqModel<float>&, const Batch&);
template Tensor<double> forward<double>(const Seq2SeqModel<double>&, const Batch&);
template double nll_loss<float>(const Tensor<float>&, std::span<const TokenId>, std::span<const std::uint8_t>);
template double nll_loss<double>(const Tensor<double>&, std::span<const TokenId>, std::span<const std::uint8_t>);

}  // namespace hiergen
