#include "hiergen/corpus.hpp"

#include <sstream>

#include "hiergen/errors.hpp"

namespace hiergen {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_terminator(const Token& t) { return t == "." || t == "!" || t == "?"; }

}  // namespace

std::size_t Article::sentence_count() const {
  std::size_t n = 0;
  for (const auto& p : paragraphs) n += p.size();
  return n;
}

std::vector<Token> Article::tokens() const {
  std::vector<Token> out;
  for (const auto& p : paragraphs)
    for (const auto& s : p) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

int heading_level(std::string_view line) {
  line = trim(line);
  if (line.size() < 2 || line.front() != '=' || line.back() != '=') return 0;
  // Count '=' signs in the leading and trailing runs, skipping interior spaces.
  std::size_t i = 0;
  int lead = 0;
  while (i < line.size() && (line[i] == '=' || line[i] == ' ')) {
    if (line[i] == '=') ++lead;
    ++i;
  }
  std::size_t j = line.size();
  int trail = 0;
  while (j > i && (line[j - 1] == '=' || line[j - 1] == ' ')) {
    if (line[j - 1] == '=') ++trail;
    --j;
  }
  if (j <= i) return 0;  // nothing but '=' signs
  if (lead != trail) return 0;
  return lead;
}

namespace {

std::string heading_text(std::string_view line) {
  line = trim(line);
  while (!line.empty() && (line.front() == '=' || line.front() == ' ')) line.remove_prefix(1);
  while (!line.empty() && (line.back() == '=' || line.back() == ' ')) line.remove_suffix(1);
  return std::string(line);
}

}  // namespace

std::vector<RawArticle> parse_corpus(std::istream& in) {
  std::vector<RawArticle> articles;
  std::string line;
  bool in_article = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const int level = heading_level(line);
    if (level == 1) {
      articles.push_back({heading_text(line), {}});
      in_article = true;
      continue;
    }
    if (!in_article || level > 1) continue;
    auto& body = articles.back().body;
    if (!body.empty()) body += '\n';
    body += line;
  }
  return articles;
}

std::vector<RawArticle> parse_corpus(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_corpus(in);
}

bool is_table_line(const std::vector<std::string>& tokens, const CleanConfig& rules) {
  if (tokens.empty()) return false;
  std::size_t pipes = 0;
  for (const auto& t : tokens) {
    if (t.find(rules.table_marker) != std::string::npos) return true;
    if (t == "|") ++pipes;
  }
  return static_cast<double>(pipes) >= rules.table_pipe_fraction * static_cast<double>(tokens.size());
}

bool is_numeric_token(std::string_view token, const CleanConfig& rules) {
  bool digit = false;
  for (char c : token) {
    if (is_digit(c)) {
      digit = true;
    } else if (rules.number_punct.find(c) == std::string::npos) {
      return false;
    }
  }
  return digit;
}

Token clean_token(std::string_view token, const CleanConfig& rules) {
  if (is_numeric_token(token, rules)) return Token(kNumToken);
  std::string lower;
  lower.reserve(token.size());
  for (std::size_t i = 0; i < token.size();) {
    const char c = token[i];
    if (is_digit(c)) {
      lower += kNumToken;
      while (i < token.size() && is_digit(token[i])) ++i;
      continue;
    }
    lower += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    ++i;
  }
  // Wikitext's own unknown marker and stray separator words map to our unk.
  if (lower == "<unk>" || lower == kNewlineToken) return Token(kUnkToken);
  return lower;
}

std::vector<Sentence> split_sentences(const std::vector<Token>& tokens) {
  std::vector<Sentence> out;
  Sentence current;
  for (const auto& t : tokens) {
    current.push_back(t);
    if (is_terminator(t)) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Article clean_article(const RawArticle& raw, const CleanConfig& rules) {
  Article article;
  for (const auto& t : split_whitespace(raw.title)) article.title.push_back(clean_token(t, rules));

  std::vector<Token> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    article.paragraphs.push_back(split_sentences(pending));
    pending.clear();
  };

  std::istringstream in(raw.body);
  std::string line;
  while (std::getline(in, line)) {
    const auto raw_tokens = split_whitespace(line);
    if (raw_tokens.empty()) {
      flush();
      continue;
    }
    if (is_table_line(raw_tokens, rules)) continue;
    for (const auto& t : raw_tokens) pending.push_back(clean_token(t, rules));
  }
  flush();

  if (article.paragraphs.empty())
    throw EmptyArticle("article '" + raw.title + "' has no body tokens after cleaning");
  return article;
}

std::vector<Token> serialize_body(const Article& article) {
  std::vector<Token> out;
  for (std::size_t p = 0; p < article.paragraphs.size(); ++p) {
    if (p) out.emplace_back(kNewlineToken);
    for (const auto& s : article.paragraphs[p]) out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

std::vector<Paragraph> parse_body(const std::vector<Token>& tokens) {
  std::vector<Paragraph> out;
  std::vector<Token> pending;
  for (const auto& t : tokens) {
    if (t == kNewlineToken) {
      if (!pending.empty()) out.push_back(split_sentences(pending));
      pending.clear();
    } else {
      pending.push_back(t);
    }
  }
  if (!pending.empty()) out.push_back(split_sentences(pending));
  return out;
}

RawArticle to_raw(const Article& article) {
  RawArticle raw{join(article.title), {}};
  for (std::size_t p = 0; p < article.paragraphs.size(); ++p) {
    if (p) raw.body += "\n\n";
    std::vector<Token> flat;
    for (const auto& s : article.paragraphs[p]) flat.insert(flat.end(), s.begin(), s.end());
    raw.body += join(flat);
  }
  return raw;
}

std::string format_corpus_line(const Article& article) {
  return join(article.title) + '\t' + join(serialize_body(article));
}

Article parse_corpus_line(std::string_view line) {
  const auto tab = line.find('\t');
  if (tab == std::string_view::npos) throw IoError("corpus line has no title/body tab separator");
  Article article;
  article.title = split_whitespace(line.substr(0, tab));
  article.paragraphs = parse_body(split_whitespace(line.substr(tab + 1)));
  if (article.paragraphs.empty()) throw EmptyArticle("corpus line has an empty body");
  return article;
}

void write_corpus(std::ostream& out, const std::vector<Article>& articles) {
  for (const auto& a : articles) out << format_corpus_line(a) << '\n';
}

std::vector<Article> read_corpus(std::istream& in) {
  std::vector<Article> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_corpus_line(line));
  }
  return out;
}

}  // namespace hiergen
