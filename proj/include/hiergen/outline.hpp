#pragma once

// SumBasic outline extraction at the meta-paragraph level.
//
// Word weights are initialized once per article (raw frequency, or TF-IDF
// normalized to sum to one) and carried across meta-paragraphs. Each
// meta-paragraph contributes one sentence: the one whose content words have
// the highest mean weight, earliest on ties. The weights of the chosen
// sentence's content words are then squared.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hiergen/corpus.hpp"

namespace hiergen {

enum class Weighting { kFreq, kTfidf };

Weighting parse_weighting(const std::string& name);
std::string to_string(Weighting w);

// The embedded English stop list (179 entries).
const std::set<std::string, std::less<>>& stop_words();
bool is_stop_word(std::string_view word);
bool is_punctuation(std::string_view token);

// Drops stop words, "num" and pure punctuation, then stems alphabetic tokens.
std::vector<std::string> preprocess_sentence(const Sentence& sentence);

struct SentenceRef {
  std::size_t paragraph = 0;
  std::size_t sentence = 0;

  auto operator<=>(const SentenceRef&) const = default;
};

struct MetaParagraph {
  std::vector<SentenceRef> sentence_refs;
};

// Accumulates whole paragraphs until at least `k` sentences are gathered; a
// short trailing accumulation becomes the final meta-paragraph. k >= 1.
std::vector<MetaParagraph> aggregate_meta_paragraphs(const Article& article, std::size_t k);
// Same rule on bare paragraph sizes; returns meta-paragraph sentence counts.
std::vector<std::size_t> aggregate_sizes(const std::vector<std::size_t>& paragraph_sizes, std::size_t k);

class DfTable {
 public:
  void add_document(const std::set<std::string>& content_words);
  void merge(const DfTable& other);

  // Floored at 1 for unseen words and capped at the document count.
  std::uint64_t df(const std::string& word) const;
  std::uint64_t documents() const { return documents_; }
  const std::map<std::string, std::uint64_t>& counts() const { return df_; }

 private:
  std::map<std::string, std::uint64_t> df_;
  std::uint64_t documents_ = 0;
};

std::set<std::string> content_word_set(const Article& article);
DfTable build_df_table(const std::vector<Article>& articles);

struct WeightTable {
  Weighting mode = Weighting::kFreq;
  std::map<std::string, double> weight;

  double at(const std::string& word) const {
    auto it = weight.find(word);
    return it == weight.end() ? 0.0 : it->second;
  }
};

// Throws NoContent when the article has no content words, or when every
// TF-IDF weight is zero (no mass to normalize). kTfidf requires `df`.
WeightTable init_weights(const Article& article, Weighting mode, const DfTable* df);

// Mean weight of the sentence's content words, 0 when it has none.
double score_sentence(const std::vector<std::string>& content_words, const WeightTable& weights);

struct OutlineRef {
  std::size_t meta_paragraph = 0;
  std::size_t paragraph = 0;
  std::size_t sentence = 0;

  bool operator==(const OutlineRef&) const = default;
};

struct Outline {
  std::vector<Sentence> sentences;
  std::vector<OutlineRef> provenance;

  // Sentences joined by the "newline" token.
  std::vector<Token> serialize() const;
};

Outline extract_outline(const Article& article, std::size_t k, Weighting mode, const DfTable* df);

}  // namespace hiergen
