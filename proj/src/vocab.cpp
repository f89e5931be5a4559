#include "hiergen/vocab.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include "hiergen/errors.hpp"

namespace hiergen {

namespace {

const std::array<std::string_view, kSpecialCount> kSpecials = {kUnkToken, kNumToken, kNewlineToken,
                                                               kEosToken, kPadToken};

bool is_special(const Token& t) {
  return std::find(kSpecials.begin(), kSpecials.end(), t) != kSpecials.end();
}

}  // namespace

TokenCounts count_tokens(const Article& article) {
  TokenCounts counts;
  for (const auto& p : article.paragraphs)
    for (const auto& s : p)
      for (const auto& t : s) ++counts[t];
  return counts;
}

void merge_counts(TokenCounts& into, const TokenCounts& from) {
  for (const auto& [token, n] : from) into[token] += n;
}

Vocabulary::Vocabulary() {
  for (auto s : kSpecials) add(Token(s), 0);
}

void Vocabulary::add(const Token& token, std::uint64_t freq) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(token);
  freqs_.push_back(freq);
}

Vocabulary Vocabulary::from_counts(const TokenCounts& counts, std::uint64_t min_freq) {
  Vocabulary v;
  v.min_freq_ = std::max<std::uint64_t>(min_freq, 1);
  for (std::size_t i = 0; i < kSpecialCount; ++i) {
    auto it = counts.find(v.tokens_[i]);
    if (it != counts.end()) v.freqs_[i] = it->second;
  }
  std::vector<std::pair<Token, std::uint64_t>> kept;
  for (const auto& [token, n] : counts)
    if (n >= v.min_freq_ && !is_special(token)) kept.emplace_back(token, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [token, n] : kept) v.add(token, n);
  return v;
}

TokenId Vocabulary::id(const Token& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const Token& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw InvalidId("token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::fingerprint() const {
  // FNV-1a over the tokens with a separator byte.
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = kSpecialCount; i < tokens_.size(); ++i)
    out << tokens_[i] << '\t' << freqs_[i] << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary v;
  std::string line;
  std::uint64_t lowest = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("vocabulary line without tab: " + line);
    std::uint64_t freq = 0;
    const char* first = line.data() + tab + 1;
    const char* last = line.data() + line.size();
    if (std::from_chars(first, last, freq).ec != std::errc{})
      throw IoError("bad frequency in vocabulary line: " + line);
    Token token = line.substr(0, tab);
    if (is_special(token) || v.contains(token)) throw IoError("duplicate or reserved token in vocabulary: " + token);
    v.add(token, freq);
    lowest = lowest == 0 ? freq : std::min(lowest, freq);
  }
  v.min_freq_ = std::max<std::uint64_t>(lowest, 1);
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<Token>& tokens) {
  if (tokens.size() < kSpecialCount) throw IoError("token list shorter than the reserved specials");
  Vocabulary v;
  for (std::size_t i = 0; i < kSpecialCount; ++i)
    if (tokens[i] != v.tokens_[i]) throw IoError("token list does not start with the reserved specials");
  for (std::size_t i = kSpecialCount; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw IoError("duplicate token in list: " + tokens[i]);
    v.add(tokens[i], 0);
  }
  return v;
}

Vocabulary build_vocab(const std::vector<Article>& articles, std::uint64_t min_freq) {
  TokenCounts counts;
  for (const auto& a : articles) merge_counts(counts, count_tokens(a));
  return Vocabulary::from_counts(counts, min_freq);
}

std::vector<TokenId> encode(std::span<const Token> tokens, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

std::vector<Token> decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<Token> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace hiergen
