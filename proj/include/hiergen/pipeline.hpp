#pragma once

// Decoding and the two-phase prompt -> outline -> article chain.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hiergen/checkpoint.hpp"
#include "hiergen/model.hpp"
#include "hiergen/random.hpp"

namespace hiergen {

struct DecodeConfig {
  std::size_t top_k = 10;
  double temperature = 1.0;
  std::size_t max_len = 400;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument.
  void validate(std::size_t vocab_size) const;
};

// Truncated, temperature-scaled, renormalized distribution over the whole
// vocabulary (zeros outside the top k). Banned ids are never kept.
template <typename Real>
std::vector<double> topk_distribution(std::span<const Real> logits, const DecodeConfig& config,
                                      std::span<const TokenId> banned = {});

// Keeps the k largest logits (ties toward the lower id), applies the
// temperature, renormalizes and samples. k == 1 is argmax and draws nothing
// from the generator. Throws NumericalError on non-finite logits.
template <typename Real>
TokenId topk_sample(std::span<const Real> logits, const DecodeConfig& config, Rng& rng,
                    std::span<const TokenId> banned = {});

// Autoregressive sampling until eos or max_len tokens (eos not included).
// Pad is never emitted. `source` must be eos-terminated.
template <typename Real>
std::vector<TokenId> decode(const Seq2SeqModel<Real>& model, std::span<const TokenId> source,
                            const DecodeConfig& config, Rng& rng);
template <typename Real>
std::vector<TokenId> decode(const Seq2SeqModel<Real>& model, std::span<const TokenId> source,
                            const DecodeConfig& config);

struct GenerationRecord {
  std::vector<Token> prompt;
  std::vector<Token> generated_outline;
  std::vector<Token> generated_article;
  // Exact source ids the article model consumed (outline + eos).
  std::vector<TokenId> article_source;
  std::uint64_t seed = 0;
  std::size_t top_k = 0;
  std::string outline_model_id;
  std::string article_model_id;
  // Generated outline was empty or all unk.
  bool degenerate = false;
};

// Throws VocabMismatch unless the outline model's target vocabulary is the
// article model's source vocabulary.
template <typename Real>
void check_chain(const LoadedModel<Real>& outline_model, const LoadedModel<Real>& article_model);

// One generator seeded with outline_config.seed drives both phases.
template <typename Real>
GenerationRecord two_phase_generate(const LoadedModel<Real>& outline_model, const LoadedModel<Real>& article_model,
                                    const std::vector<Token>& prompt, const DecodeConfig& outline_config,
                                    const DecodeConfig& article_config);

// `gen.meta` line: seed, top_k, degenerate flag.
std::string format_meta(const GenerationRecord& record);

// Document log-likelihood lower bound: the best joint score over sampled
// outlines, where sample 0 is the greedy outline and samples 1..n-1 are top-k
// draws seeded with seed + i.
struct LowerBound {
  double log2_prob = 0.0;
  std::vector<double> sample_scores;
  std::vector<std::vector<TokenId>> outlines;
};

template <typename Real>
LowerBound doc_loglik_lower_bound(const Seq2SeqModel<Real>& outline_model, const Seq2SeqModel<Real>& article_model,
                                  std::span<const TokenId> prompt, std::span<const TokenId> article,
                                  std::size_t samples, std::uint64_t seed, const DecodeConfig& sampling);

// Appends eos.
std::vector<TokenId> with_eos(std::span<const TokenId> ids);

}  // namespace hiergen
