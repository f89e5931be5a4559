#pragma once

#include <cstdint>
#include <string>

namespace hiergen {

struct SyntheticOptions {
  std::size_t articles = 200;
  std::uint64_t seed = 1;
  std::size_t min_paragraphs = 2;
  std::size_t max_paragraphs = 2;
  std::size_t min_sentences = 3;
  std::size_t max_sentences = 3;
  std::size_t topics = 16;          // size of the topic-word pool, at most 48
  std::size_t article_topics = 4;   // topic words drawn per article
};

// Wikitext-formatted toy corpus from a seeded template grammar. Each article
// draws a few topic words from the pool; every paragraph pairs two of them
// and each of its sentences names both. The opening sentence only names the
// place, so the prompt carries no topic words while an extracted outline
// does. Headings, a pipe table and years show up now and then to exercise
// the cleaner.
std::string generate_synthetic_corpus(const SyntheticOptions& options);

}  // namespace hiergen
