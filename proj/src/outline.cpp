#include "hiergen/outline.hpp"

#include <cctype>
#include <cmath>

#include "hiergen/errors.hpp"
#include "hiergen/porter.hpp"

namespace hiergen {

Weighting parse_weighting(const std::string& name) {
  if (name == "freq") return Weighting::kFreq;
  if (name == "tfidf") return Weighting::kTfidf;
  throw std::invalid_argument("unknown weighting '" + name + "' (expected freq or tfidf)");
}

std::string to_string(Weighting w) { return w == Weighting::kFreq ? "freq" : "tfidf"; }

const std::set<std::string, std::less<>>& stop_words() {
  static const std::set<std::string, std::less<>> kWords = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
      "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
      "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
      "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
      "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
      "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
      "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
      "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
      "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
      "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
      "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
      "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
      "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
      "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
      "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan",
      "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't",
      "wouldn", "wouldn't"};
  return kWords;
}

bool is_stop_word(std::string_view word) { return stop_words().count(word) != 0; }

bool is_punctuation(std::string_view token) {
  if (token.empty()) return false;
  for (unsigned char c : token)
    if (std::isalnum(c) || c >= 0x80) return false;
  return true;
}

namespace {

bool is_alpha_word(std::string_view token) {
  for (char c : token)
    if (c < 'a' || c > 'z') return false;
  return !token.empty();
}

}  // namespace

std::vector<std::string> preprocess_sentence(const Sentence& sentence) {
  std::vector<std::string> out;
  for (const auto& t : sentence) {
    if (t == kNumToken || is_punctuation(t) || is_stop_word(t)) continue;
    out.push_back(is_alpha_word(t) ? porter_stem(t) : t);
  }
  return out;
}

std::vector<std::size_t> aggregate_sizes(const std::vector<std::size_t>& paragraph_sizes, std::size_t k) {
  if (k == 0) throw std::invalid_argument("meta-paragraph threshold k must be >= 1");
  std::vector<std::size_t> out;
  std::size_t acc = 0;
  bool open = false;
  for (auto n : paragraph_sizes) {
    acc += n;
    open = true;
    if (acc >= k) {
      out.push_back(acc);
      acc = 0;
      open = false;
    }
  }
  if (open) out.push_back(acc);
  return out;
}

std::vector<MetaParagraph> aggregate_meta_paragraphs(const Article& article, std::size_t k) {
  if (k == 0) throw std::invalid_argument("meta-paragraph threshold k must be >= 1");
  std::vector<MetaParagraph> out;
  MetaParagraph current;
  for (std::size_t p = 0; p < article.paragraphs.size(); ++p) {
    for (std::size_t s = 0; s < article.paragraphs[p].size(); ++s) current.sentence_refs.push_back({p, s});
    if (current.sentence_refs.size() >= k) {
      out.push_back(std::move(current));
      current = {};
    }
  }
  if (!current.sentence_refs.empty()) out.push_back(std::move(current));
  return out;
}

void DfTable::add_document(const std::set<std::string>& content_words) {
  ++documents_;
  for (const auto& w : content_words) ++df_[w];
}

void DfTable::merge(const DfTable& other) {
  documents_ += other.documents_;
  for (const auto& [w, n] : other.df_) df_[w] += n;
}

std::uint64_t DfTable::df(const std::string& word) const {
  auto it = df_.find(word);
  std::uint64_t n = it == df_.end() ? 1 : std::max<std::uint64_t>(it->second, 1);
  return documents_ == 0 ? n : std::min(n, documents_);
}

std::set<std::string> content_word_set(const Article& article) {
  std::set<std::string> words;
  for (const auto& p : article.paragraphs)
    for (const auto& s : p)
      for (auto& w : preprocess_sentence(s)) words.insert(std::move(w));
  return words;
}

DfTable build_df_table(const std::vector<Article>& articles) {
  DfTable table;
  for (const auto& a : articles) table.add_document(content_word_set(a));
  return table;
}

WeightTable init_weights(const Article& article, Weighting mode, const DfTable* df) {
  if (mode == Weighting::kTfidf && df == nullptr) throw std::invalid_argument("tfidf weighting needs a df table");
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  for (const auto& p : article.paragraphs)
    for (const auto& s : p)
      for (auto& w : preprocess_sentence(s)) {
        ++counts[w];
        ++total;
      }
  if (total == 0) throw NoContent("article has no content words");

  WeightTable table;
  table.mode = mode;
  const double n = static_cast<double>(total);
  if (mode == Weighting::kFreq) {
    for (const auto& [w, c] : counts) table.weight[w] = static_cast<double>(c) / n;
    return table;
  }

  const double docs = static_cast<double>(std::max<std::uint64_t>(df->documents(), 1));
  double mass = 0.0;
  for (const auto& [w, c] : counts) {
    const double idf = -std::log(static_cast<double>(df->df(w)) / docs);
    const double raw = static_cast<double>(c) / n * idf;
    table.weight[w] = raw;
    mass += raw;
  }
  if (!(mass > 0.0)) throw NoContent("every content word occurs in all documents; tf-idf mass is zero");
  for (auto& [w, v] : table.weight) v /= mass;
  return table;
}

double score_sentence(const std::vector<std::string>& content_words, const WeightTable& weights) {
  if (content_words.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& w : content_words) sum += weights.at(w);
  return sum / static_cast<double>(content_words.size());
}

std::vector<Token> Outline::serialize() const {
  std::vector<Token> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out.emplace_back(kNewlineToken);
    out.insert(out.end(), sentences[i].begin(), sentences[i].end());
  }
  return out;
}

Outline extract_outline(const Article& article, std::size_t k, Weighting mode, const DfTable* df) {
  if (article.paragraphs.empty()) throw EmptyArticle("cannot outline an empty article");
  const auto metas = aggregate_meta_paragraphs(article, k);

  Outline outline;
  auto emit = [&](std::size_t m, const SentenceRef& ref) {
    outline.sentences.push_back(article.sentence(ref.paragraph, ref.sentence));
    outline.provenance.push_back({m, ref.paragraph, ref.sentence});
  };

  WeightTable weights;
  try {
    weights = init_weights(article, mode, df);
  } catch (const NoContent&) {
    for (std::size_t m = 0; m < metas.size(); ++m) emit(m, metas[m].sentence_refs.front());
    return outline;
  }

  for (std::size_t m = 0; m < metas.size(); ++m) {
    const SentenceRef* best = nullptr;
    std::vector<std::string> best_words;
    double best_score = 0.0;
    for (const auto& ref : metas[m].sentence_refs) {
      auto words = preprocess_sentence(article.sentence(ref.paragraph, ref.sentence));
      const double score = score_sentence(words, weights);
      if (best == nullptr || score > best_score) {
        best = &ref;
        best_score = score;
        best_words = std::move(words);
      }
    }
    emit(m, *best);
    for (const auto& w : std::set<std::string>(best_words.begin(), best_words.end())) {
      auto& v = weights.weight[w];
      v = v * v;
    }
  }
  return outline;
}

}  // namespace hiergen
