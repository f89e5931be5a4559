#pragma once

// Wikitext-style corpus ingestion and cleaning.
//
// Articles start at level-one headings (`= title =`, with or without spaces
// between the equals signs). Deeper headings are dropped from the body.
// Cleaning drops table-like lines, canonicalizes numbers to the token "num",
// lowercases, and segments the pre-tokenized text into paragraphs (blank-line
// separated) and sentences (split after ".", "!" or "?"). The sentence rule is
// known to mis-split abbreviations such as "a.h." followed by "."; we accept that.

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace hiergen {

using Token = std::string;
using Sentence = std::vector<Token>;
using Paragraph = std::vector<Sentence>;

inline constexpr std::string_view kUnkToken = "unk";
inline constexpr std::string_view kNumToken = "num";
inline constexpr std::string_view kNewlineToken = "newline";
inline constexpr std::string_view kEosToken = "eos";
inline constexpr std::string_view kPadToken = "pad";

struct RawArticle {
  std::string title;
  std::string body;

  bool operator==(const RawArticle&) const = default;
};

struct Article {
  Sentence title;
  std::vector<Paragraph> paragraphs;

  std::size_t sentence_count() const;
  // All body tokens in order, without paragraph separators.
  std::vector<Token> tokens() const;
  const Sentence& sentence(std::size_t paragraph, std::size_t index) const {
    return paragraphs.at(paragraph).at(index);
  }

  bool operator==(const Article&) const = default;
};

struct CleanConfig {
  // A line is a table row when at least this fraction of its tokens are "|".
  double table_pipe_fraction = 0.25;
  // Lines containing this substring are always table markup.
  std::string table_marker = "||";
  // Characters allowed in a numeric token besides digits.
  std::string number_punct = ",./-:";
};

std::vector<RawArticle> parse_corpus(std::istream& in);
std::vector<RawArticle> parse_corpus(std::string_view text);

// Heading level of a line: 0 when the line is not a heading.
int heading_level(std::string_view line);

bool is_table_line(const std::vector<std::string>& tokens, const CleanConfig& rules = {});
bool is_numeric_token(std::string_view token, const CleanConfig& rules = {});
// Lowercases and canonicalizes one raw token. Numeric tokens become "num";
// digit runs inside other tokens become "num" as well ("12th" -> "numth").
Token clean_token(std::string_view token, const CleanConfig& rules = {});

// Throws EmptyArticle when no body tokens survive cleaning.
Article clean_article(const RawArticle& raw, const CleanConfig& rules = {});

// Splits a token stream after sentence terminators. A trailing run without a
// terminator forms the last sentence.
std::vector<Sentence> split_sentences(const std::vector<Token>& tokens);

// Body tokens with "newline" between paragraphs.
std::vector<Token> serialize_body(const Article& article);

// Inverse of serialize_body: splits on "newline", then into sentences.
std::vector<Paragraph> parse_body(const std::vector<Token>& tokens);

// Renders a cleaned article as raw text (one paragraph per line, blank
// lines between paragraphs); cleaning the result reproduces the article.
RawArticle to_raw(const Article& article);

// Cleaned-corpus file: `title<TAB>body` per line.
std::string format_corpus_line(const Article& article);
Article parse_corpus_line(std::string_view line);
void write_corpus(std::ostream& out, const std::vector<Article>& articles);
std::vector<Article> read_corpus(std::istream& in);

std::vector<std::string> split_whitespace(std::string_view text);
std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

}  // namespace hiergen
