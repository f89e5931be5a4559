#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hiergen/corpus.hpp"

namespace hiergen {

using TokenId = std::int32_t;

inline constexpr TokenId kUnkId = 0;
inline constexpr TokenId kNumId = 1;
inline constexpr TokenId kNewlineId = 2;
inline constexpr TokenId kEosId = 3;
inline constexpr TokenId kPadId = 4;
inline constexpr std::size_t kSpecialCount = 5;

// Token counts; merging is associative and order-independent.
using TokenCounts = std::map<Token, std::uint64_t>;

TokenCounts count_tokens(const Article& article);
void merge_counts(TokenCounts& into, const TokenCounts& from);

class Vocabulary {
 public:
  // Specials only.
  Vocabulary();

  // Specials, then tokens with count >= min_freq by descending count, ties
  // broken lexicographically. Specials found in `counts` are not duplicated.
  static Vocabulary from_counts(const TokenCounts& counts, std::uint64_t min_freq);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(const Token& token) const;  // unk id when absent
  bool contains(const Token& token) const { return index_.count(token) != 0; }
  const Token& token(TokenId id) const;  // throws InvalidId
  std::uint64_t frequency(TokenId id) const { return freqs_.at(static_cast<std::size_t>(id)); }
  std::uint64_t min_freq() const { return min_freq_; }
  const std::vector<Token>& tokens() const { return tokens_; }

  // Stable 64-bit fingerprint of the id->token list.
  std::uint64_t fingerprint() const;

  // `token<TAB>frequency` per line for every non-special token in id order.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);
  // Rebuilds from an id-ordered token list (specials first).
  static Vocabulary from_tokens(const std::vector<Token>& tokens);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(const Token& token, std::uint64_t freq);

  std::vector<Token> tokens_;
  std::vector<std::uint64_t> freqs_;
  std::unordered_map<Token, TokenId> index_;
  std::uint64_t min_freq_ = 1;
};

Vocabulary build_vocab(const std::vector<Article>& articles, std::uint64_t min_freq = 3);

std::vector<TokenId> encode(std::span<const Token> tokens, const Vocabulary& vocab);
std::vector<Token> decode(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace hiergen
