#include "hiergen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hiergen/train.hpp"

namespace hiergen {

void DecodeConfig::validate(std::size_t vocab_size) const {
  if (top_k < 1) throw std::invalid_argument("top-k must be >= 1");
  if (top_k > vocab_size)
    throw std::invalid_argument("top-k " + std::to_string(top_k) + " exceeds vocabulary size " +
                                std::to_string(vocab_size));
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (max_len < 1) throw std::invalid_argument("max length must be >= 1");
}

std::vector<TokenId> with_eos(std::span<const TokenId> ids) {
  std::vector<TokenId> out(ids.begin(), ids.end());
  out.push_back(kEosId);
  return out;
}

namespace {

template <typename Real>
std::vector<std::size_t> top_indices(std::span<const Real> logits, std::size_t k, std::span<const TokenId> banned) {
  for (Real v : logits)
    if (!std::isfinite(v)) throw NumericalError("non-finite logit");
  std::vector<std::size_t> idx;
  idx.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (std::find(banned.begin(), banned.end(), static_cast<TokenId>(i)) == banned.end()) idx.push_back(i);
  if (idx.empty()) throw std::invalid_argument("every id is banned");
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  idx.resize(k);
  return idx;
}

template <typename Real>
std::vector<double> kept_probabilities(std::span<const Real> logits, const std::vector<std::size_t>& kept,
                                       double temperature) {
  std::vector<double> p(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) p[i] = static_cast<double>(logits[kept[i]]) / temperature;
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (auto& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace

template <typename Real>
std::vector<double> topk_distribution(std::span<const Real> logits, const DecodeConfig& config,
                                      std::span<const TokenId> banned) {
  const auto kept = top_indices(logits, config.top_k, banned);
  const auto p = kept_probabilities(logits, kept, config.temperature);
  std::vector<double> out(logits.size(), 0.0);
  for (std::size_t i = 0; i < kept.size(); ++i) out[kept[i]] = p[i];
  return out;
}

template <typename Real>
TokenId topk_sample(std::span<const Real> logits, const DecodeConfig& config, Rng& rng,
                    std::span<const TokenId> banned) {
  const auto kept = top_indices(logits, config.top_k, banned);
  if (kept.size() == 1) return static_cast<TokenId>(kept.front());
  const auto p = kept_probabilities(logits, kept, config.temperature);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<TokenId>(kept[i]);
  }
  return static_cast<TokenId>(kept.back());
}

template <typename Real>
std::vector<TokenId> decode(const Seq2SeqModel<Real>& model, std::span<const TokenId> source,
                            const DecodeConfig& config, Rng& rng) {
  config.validate(model.config().target_vocab);
  static constexpr TokenId kBanned[] = {kPadId};
  auto decoder = model.start_decoding(source);
  const std::size_t limit = std::min(config.max_len, model.config().max_positions);
  std::vector<TokenId> out;
  TokenId input = kEosId;
  while (out.size() < limit) {
    const auto logits = decoder.step(input);
    const TokenId next = topk_sample(std::span<const Real>(logits), config, rng, kBanned);
    if (next == kEosId) break;
    out.push_back(next);
    input = next;
  }
  return out;
}

template <typename Real>
std::vector<TokenId> decode(const Seq2SeqModel<Real>& model, std::span<const TokenId> source,
                            const DecodeConfig& config) {
  Rng rng(config.seed);
  return decode(model, source, config, rng);
}

template <typename Real>
void check_chain(const LoadedModel<Real>& outline_model, const LoadedModel<Real>& article_model) {
  if (outline_model.target_vocab.fingerprint() != article_model.source_vocab.fingerprint())
    throw VocabMismatch("outline model target vocabulary (" + std::to_string(outline_model.target_vocab.size()) +
                        " tokens) differs from article model source vocabulary (" +
                        std::to_string(article_model.source_vocab.size()) + " tokens)");
}

namespace {

std::string model_id(const ModelConfig& c, const Vocabulary& src, const Vocabulary& tgt, std::uint64_t step) {
  std::ostringstream out;
  out << to_string(c.attention) << "-h" << c.hidden_dim << "-s" << step << "-" << std::hex
      << ((src.fingerprint() ^ (tgt.fingerprint() << 1)) & 0xffffffffULL);
  return out.str();
}

}  // namespace

template <typename Real>
GenerationRecord two_phase_generate(const LoadedModel<Real>& outline_model, const LoadedModel<Real>& article_model,
                                    const std::vector<Token>& prompt, const DecodeConfig& outline_config,
                                    const DecodeConfig& article_config) {
  check_chain(outline_model, article_model);
  GenerationRecord rec;
  rec.prompt = prompt;
  rec.seed = outline_config.seed;
  rec.top_k = outline_config.top_k;
  rec.outline_model_id = model_id(outline_model.model.config(), outline_model.source_vocab, outline_model.target_vocab,
                                  outline_model.model.step());
  rec.article_model_id = model_id(article_model.model.config(), article_model.source_vocab,
                                  article_model.target_vocab, article_model.model.step());

  Rng rng(outline_config.seed);
  const auto prompt_ids = with_eos(encode(prompt, outline_model.source_vocab));
  const auto outline_ids = decode(outline_model.model, prompt_ids, outline_config, rng);
  rec.generated_outline = hiergen::decode(outline_ids, outline_model.target_vocab);
  rec.degenerate = std::all_of(outline_ids.begin(), outline_ids.end(), [](TokenId id) { return id == kUnkId; });

  // Hierarchical article models derive sentence spans from this row, i.e.
  // from the generated outline's newline positions.
  rec.article_source = with_eos(outline_ids);
  const auto article_ids = decode(article_model.model, rec.article_source, article_config, rng);
  rec.generated_article = hiergen::decode(article_ids, article_model.target_vocab);
  return rec;
}

std::string format_meta(const GenerationRecord& record) {
  std::ostringstream out;
  out << record.seed << '\t' << record.top_k << '\t' << (record.degenerate ? 1 : 0);
  return out.str();
}

template <typename Real>
LowerBound doc_loglik_lower_bound(const Seq2SeqModel<Real>& outline_model, const Seq2SeqModel<Real>& article_model,
                                  std::span<const TokenId> prompt, std::span<const TokenId> article,
                                  std::size_t samples, std::uint64_t seed, const DecodeConfig& sampling) {
  if (samples < 1) throw std::invalid_argument("lower bound needs at least one outline sample");
  if (outline_model.config().target_vocab != article_model.config().source_vocab)
    throw VocabMismatch("outline model target vocabulary size differs from article model source vocabulary size");
  LowerBound result;
  for (std::size_t i = 0; i < samples; ++i) {
    DecodeConfig cfg = sampling;
    cfg.seed = seed + i;
    if (i == 0) cfg.top_k = 1;
    auto outline = decode(outline_model, prompt, cfg);
    const auto outline_target = with_eos(outline);
    const double score =
        sequence_logprob(outline_model, prompt, outline_target) + sequence_logprob(article_model, outline_target, article);
    result.sample_scores.push_back(score);
    result.outlines.push_back(std::move(outline));
  }
  result.log2_prob = *std::max_element(result.sample_scores.begin(), result.sample_scores.end());
  return result;
}

#define HIERGEN_INSTANTIATE(Real)                                                                                  \
  template std::vector<double> topk_distribution<Real>(std::span<const Real>, const DecodeConfig&,                \
                                                       std::span<const TokenId>);                                  \
  template TokenId topk_sample<Real>(std::span<const Real>, const DecodeConfig&, Rng&, std::span<const TokenId>); \
  template std::vector<TokenId> decode<Real>(const Seq2SeqModel<Real>&, std::span<const TokenId>,                 \
                                             const DecodeConfig&, Rng&);                                           \
  template std::vector<TokenId> decode<Real>(const Seq2SeqModel<Real>&, std::span<const TokenId>,                 \
                                             const DecodeConfig&);                                                 \
  template void check_chain<Real>(const LoadedModel<Real>&, const LoadedModel<Real>&);                            \
  template GenerationRecord two_phase_generate<Real>(const LoadedModel<Real>&, const LoadedModel<Real>&,          \
                                                     const std::vector<Token>&, const DecodeConfig&,               \
                                                     const DecodeConfig&);                                         \
  template LowerBound doc_loglik_lower_bound<Real>(const Seq2SeqModel<Real>&, const Seq2SeqModel<Real>&,          \
                                                   std::span<const TokenId>, std::span<const TokenId>,             \
                                                   std::size_t, std::uint64_t, const DecodeConfig&);

HIERGEN_INSTANTIATE(float)
HIERGEN_INSTANTIATE(double)

#undef HIERGEN_INSTANTIATE

}  // namespace hiergen
