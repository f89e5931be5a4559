#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "hiergen/errors.hpp"
#include "hiergen/model.hpp"
#include "hiergen/random.hpp"

using namespace hiergen;

namespace {

using Mat = std::vector<std::vector<double>>;

ModelConfig tiny(AttentionKind kind, bool self_attention, std::size_t width = 3) {
  ModelConfig c;
  c.source_vocab = 9;
  c.target_vocab = 8;
  c.embed_dim = 3;
  c.hidden_dim = 4;
  c.encoder_blocks = 2;
  c.decoder_blocks = 2;
  c.kernel_width = width;
  c.attention = kind;
  c.self_attention = self_attention;
  c.max_positions = 16;
  c.seed = 7;
  return c;
}

// Larger parameter values so the comparison is not dominated by near-zero terms.
Seq2SeqModel<double> generic_model(const ModelConfig& c) {
  Seq2SeqModel<double> m(c);
  Rng rng(c.seed + 100);
  for (auto& [name, t] : m.parameters())
    for (auto& v : t.data) v = 0.5 * rng.normal();
  return m;
}

Mat linear_rows(const Mat& x, const Tensor<double>& w, const Tensor<double>& b) {
  Mat out;
  for (const auto& row : x) {
    std::vector<double> y(w.shape[1]);
    for (std::size_t j = 0; j < y.size(); ++j) {
      y[j] = b.data[j];
      for (std::size_t i = 0; i < row.size(); ++i) y[j] += row[i] * w(i, j);
    }
    out.push_back(y);
  }
  return out;
}

// Convolution over positions with `left` zero rows before and `right` after,
// followed by GLU and the scaled residual.
Mat conv_block(const Mat& h, const Tensor<double>& w, const Tensor<double>& b, std::size_t left) {
  const std::size_t n = h.size(), d = h[0].size(), width = w.shape[0];
  Mat out(n, std::vector<double>(d));
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> z(2 * d);
    for (std::size_t o = 0; o < 2 * d; ++o) {
      z[o] = b.data[o];
      for (std::size_t k = 0; k < width; ++k) {
        const long src = static_cast<long>(t + k) - static_cast<long>(left);
        if (src < 0 || src >= static_cast<long>(n)) continue;
        for (std::size_t i = 0; i < d; ++i) z[o] += h[src][i] * w.data[(k * d + i) * 2 * d + o];
      }
    }
    for (std::size_t i = 0; i < d; ++i)
      out[t][i] = (h[t][i] + z[i] / (1.0 + std::exp(-z[d + i]))) * std::sqrt(0.5);
  }
  return out;
}

Mat embed(const Tensor<double>& table, const Tensor<double>& pos, std::span<const TokenId> ids) {
  Mat x;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    std::vector<double> row(table.shape[1]);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = table(static_cast<std::size_t>(ids[t]), i) + pos(t, i);
    x.push_back(row);
  }
  return x;
}

Tensor<double> to_tensor(const Mat& m) {
  Tensor<double> t({m.size(), m[0].size()});
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) t(r, c) = m[r][c];
  return t;
}

GateWeights<double> gate_of(const ParamMap<double>& p, const std::string& prefix) {
  return {p.at(prefix + "wq"), p.at(prefix + "wc"), p.at(prefix + "b")};
}

// Loop re-implementation of the teacher-forced forward pass. The attention
// layers themselves use the value-level functions, which have their own
// hand-computed tests.
Mat oracle_logits(const Seq2SeqModel<double>& m, std::span<const TokenId> src, std::span<const TokenId> in) {
  const auto& c = m.config();
  const auto& p = m.parameters();
  auto name = [](const char* side, std::size_t i, const char* leaf) {
    return std::string(side) + ".block" + std::to_string(i) + "." + leaf;
  };
  Mat e = linear_rows(embed(p.at("enc.embed"), p.at("enc.pos"), src), p.at("enc.in.w"), p.at("enc.in.b"));
  for (std::size_t i = 0; i < c.encoder_blocks; ++i)
    e = conv_block(e, p.at(name("enc", i, "conv.w")), p.at(name("enc", i, "conv.b")), (c.kernel_width - 1) / 2);
  const Tensor<double> enc = to_tensor(e);
  const auto spans = sentence_spans(src);

  Mat h = linear_rows(embed(p.at("dec.embed"), p.at("dec.pos"), in), p.at("dec.in.w"), p.at("dec.in.b"));
  for (std::size_t i = 0; i < c.decoder_blocks; ++i) {
    h = conv_block(h, p.at(name("dec", i, "conv.w")), p.at(name("dec", i, "conv.b")), c.kernel_width - 1);
    if (c.self_attention) {
      const Tensor<double> states = to_tensor(h);
      const auto g = gate_of(p, name("dec", i, "self."));
      Mat next = h;
      for (std::size_t t = 0; t < h.size(); ++t) {
        const auto a = gated_self_attention(states, t, g);
        for (std::size_t k = 0; k < h[t].size(); ++k) next[t][k] = (h[t][k] + a.context[k]) * std::sqrt(0.5);
      }
      h = next;
    }
    const auto g = gate_of(p, name("dec", i, "attn."));
    for (auto& row : h) {
      const auto a = c.attention == AttentionKind::kFlat
                         ? gated_attention(std::span<const double>(row), enc, g)
                         : hier_attention(std::span<const double>(row), enc, spans, g, c.hier_norm);
      for (std::size_t k = 0; k < row.size(); ++k) row[k] = (row[k] + a.context[k]) * std::sqrt(0.5);
    }
  }
  return linear_rows(h, p.at("dec.out.w"), p.at("dec.out.b"));
}

const std::vector<TokenId> kSource = {5, 6, 7, 2, 8, 5, 3};  // two sentences split by newline
const std::vector<TokenId> kTarget = {5, 7, 6, 6, 3};

}  // namespace

TEST_CASE("teacher-forced logits match a loop re-implementation") {
  for (auto kind : {AttentionKind::kFlat, AttentionKind::kHierarchical})
    for (bool self : {false, true})
      for (std::size_t width : {1u, 2u, 3u}) {
        auto c = tiny(kind, self, width);
        for (auto norm : {HierNorm::kSentence, HierNorm::kGlobal}) {
          c.hier_norm = norm;
          const auto m = generic_model(c);
          const auto input = shift_right(kTarget);
          const auto got = m.logits(kSource, input);
          const auto want = oracle_logits(m, kSource, input);
          REQUIRE(got.rows() == want.size());
          for (std::size_t t = 0; t < want.size(); ++t)
            for (std::size_t v = 0; v < want[t].size(); ++v) CHECK(got(t, v) == doctest::Approx(want[t][v]).epsilon(1e-12));
        }
      }
}

TEST_CASE("incremental decoder reproduces teacher-forced logits") {
  for (auto kind : {AttentionKind::kFlat, AttentionKind::kHierarchical})
    for (bool self : {false, true}) {
      const auto m = generic_model(tiny(kind, self));
      const auto input = shift_right(kTarget);
      const auto full = m.logits(kSource, input);
      auto dec = m.start_decoding(kSource);
      for (std::size_t t = 0; t < input.size(); ++t) {
        const auto step = dec.step(input[t]);
        CHECK(dec.position() == t + 1);
        for (std::size_t v = 0; v < step.size(); ++v) CHECK(std::abs(step[v] - full(t, v)) < 1e-12);
      }
    }
}

TEST_CASE("float and double models agree") {
  const auto c = tiny(AttentionKind::kHierarchical, true);
  Seq2SeqModel<double> d(c);
  Seq2SeqModel<float> f(c);
  const auto ld = d.logits(kSource, shift_right(kTarget));
  const auto lf = f.logits(kSource, shift_right(kTarget));
  for (std::size_t i = 0; i < ld.size(); ++i) CHECK(std::abs(ld.data[i] - static_cast<double>(lf.data[i])) < 1e-5);
}

TEST_CASE("decoder is causal") {
  const auto m = generic_model(tiny(AttentionKind::kFlat, true));
  auto input = shift_right(kTarget);
  const auto before = m.logits(kSource, input);
  input.back() = 1;
  const auto after = m.logits(kSource, input);
  for (std::size_t t = 0; t + 1 < input.size(); ++t)
    for (std::size_t v = 0; v < 8; ++v) CHECK(before(t, v) == after(t, v));
}

TEST_CASE("token log-probabilities normalize") {
  const auto m = generic_model(tiny(AttentionKind::kHierarchical, true));
  const auto input = shift_right(kTarget);
  const auto l = m.logits(kSource, input);
  const auto lp = m.token_logprobs(kSource, kTarget);
  REQUIRE(lp.size() == kTarget.size());
  for (std::size_t t = 0; t < kTarget.size(); ++t) {
    double z = 0;
    for (std::size_t v = 0; v < 8; ++v) z += std::exp(l(t, v));
    CHECK(lp[t] == doctest::Approx(l(t, static_cast<std::size_t>(kTarget[t])) - std::log(z)).epsilon(1e-12));
    CHECK(lp[t] < 0);
  }
}

TEST_CASE("same seed gives the same initialization") {
  const auto c = tiny(AttentionKind::kFlat, true);
  Seq2SeqModel<double> a(c), b(c);
  CHECK(a.parameters() == b.parameters());
  auto c2 = c;
  c2.seed = 8;
  Seq2SeqModel<double> other(c2);
  CHECK_FALSE(a.parameters() == other.parameters());
  // biases start at zero
  for (const auto& v : a.parameters().at("dec.out.b").data) CHECK(v == 0.0);
}

TEST_CASE("parameter count follows the configuration") {
  const auto c = tiny(AttentionKind::kFlat, true);
  Seq2SeqModel<double> m(c);
  const std::size_t e = 3, h = 4, w = 3, n = 16;
  const std::size_t enc = 9 * e + n * e + e * h + h + 2 * (w * h * 2 * h + 2 * h);
  const std::size_t dec = 8 * e + n * e + e * h + h + 2 * (w * h * 2 * h + 2 * h + 2 * (2 * h * h + h)) + h * 8 + 8;
  CHECK(m.parameter_count() == enc + dec);
}

TEST_CASE("config text round trip and validation") {
  auto c = tiny(AttentionKind::kHierarchical, false);
  c.hier_norm = HierNorm::kGlobal;
  c.seed = 123456789012345ULL;
  CHECK(ModelConfig::from_text(c.to_text()) == c);

  ModelConfig d;
  d.apply("# comment\nembed_dim=5\r\nattention=hier\n\n");
  CHECK(d.embed_dim == 5);
  CHECK(d.attention == AttentionKind::kHierarchical);
  CHECK_THROWS_AS(ModelConfig::from_text("bogus=1"), std::invalid_argument);
  CHECK_THROWS_AS(ModelConfig::from_text("embed_dim"), std::invalid_argument);
  CHECK_THROWS_AS(ModelConfig::from_text("embed_dim=4x"), std::invalid_argument);
  CHECK_THROWS_AS(ModelConfig::from_text("attention=sideways"), std::invalid_argument);
  ModelConfig zero;
  zero.hidden_dim = 0;
  CHECK_THROWS_AS(zero.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Seq2SeqModel<double>{zero}, std::invalid_argument);
}

TEST_CASE("shift_right") {
  const std::vector<TokenId> t = {5, 6, 3};
  CHECK(shift_right(t) == std::vector<TokenId>{kEosId, 5, 6});
  CHECK(shift_right(std::vector<TokenId>{}).empty());
}

TEST_CASE("invalid inputs are rejected") {
  const auto c = tiny(AttentionKind::kFlat, true);
  Seq2SeqModel<double> m(c);
  CHECK_THROWS_AS(m.logits(std::vector<TokenId>{}, shift_right(kTarget)), ShapeError);
  CHECK_THROWS_AS(m.logits(std::vector<TokenId>{9}, shift_right(kTarget)), InvalidId);
  CHECK_THROWS_AS(m.logits(std::vector<TokenId>{-1}, shift_right(kTarget)), InvalidId);
  CHECK_THROWS_AS(m.logits(kSource, std::vector<TokenId>{8}), InvalidId);
  CHECK_THROWS_AS(m.logits(std::vector<TokenId>(17, 5), shift_right(kTarget)), ShapeError);

  auto dec = m.start_decoding(kSource);
  CHECK_THROWS_AS(dec.step(8), InvalidId);
  for (std::size_t i = 0; i < 16; ++i) dec.step(kEosId);
  CHECK_THROWS_AS(dec.step(kEosId), ShapeError);

  auto params = m.parameters();
  params.erase("dec.out.b");
  CHECK_THROWS_AS((Seq2SeqModel<double>(c, params)), ShapeError);
  params = m.parameters();
  params.at("dec.out.b") = Tensor<double>({7});
  CHECK_THROWS_AS((Seq2SeqModel<double>(c, params)), ShapeError);
  params = m.parameters();
  params.emplace("extra", Tensor<double>({1}));
  CHECK_THROWS_AS((Seq2SeqModel<double>(c, params)), ShapeError);
}

TEST_CASE("batch padding, forward and masked loss") {
  const auto m = generic_model(tiny(AttentionKind::kHierarchical, true));
  const std::vector<Example> examples = {{kSource, kTarget}, {{6, 3}, {7, 3}}};
  const Batch b = Batch::from_examples(examples);
  CHECK(b.rows == 2);
  CHECK(b.source_len == 7);
  CHECK(b.target_len == 5);
  CHECK(b.source_row(1) == std::vector<TokenId>{6, 3});
  CHECK(b.target_row(1) == std::vector<TokenId>{7, 3});
  CHECK(b.mask == std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 1, 0, 0, 0});
  CHECK(b.target[7] == kPadId);
  REQUIRE(b.spans.size() == 2);
  CHECK(b.spans[0].size() == 2);

  const auto logits = forward(m, b);
  CHECK(logits.shape == Shape{2, 5, 8});
  for (std::size_t i = 7 * 8; i < 10 * 8; ++i) CHECK(logits.data[i] == 0.0);

  // Mean NLL over the seven real positions equals the per-token log-probs.
  double want = 0;
  for (const auto& e : examples)
    for (double lp : m.token_logprobs(e.source, e.target)) want -= lp;
  want /= 7;
  CHECK(nll_loss(logits, b.target, b.mask) == doctest::Approx(want).epsilon(1e-12));

  // The graph loss of one example is its summed NLL.
  Graph<double> g(false);
  const double summed = g.value(m.build_nll(g, nullptr, examples[0])).data[0];
  double direct = 0;
  for (double lp : m.token_logprobs(kSource, kTarget)) direct -= lp;
  CHECK(summed == doctest::Approx(direct).epsilon(1e-12));

  const std::vector<std::uint8_t> none(10, 0);
  CHECK_THROWS_AS(nll_loss(logits, b.target, none), EmptyBatch);
  CHECK_THROWS_AS(nll_loss(logits, std::vector<TokenId>(3, 0), none), ShapeError);
  std::vector<TokenId> bad = b.target;
  bad[0] = 99;
  CHECK_THROWS_AS(nll_loss(logits, bad, b.mask), InvalidId);
}
