#include "hiergen/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hiergen/errors.hpp"

namespace hiergen {

SplitRatios parse_splits(const std::string& text) {
  std::vector<double> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) parts.push_back(std::stod(item));
  if (parts.size() != 3) throw std::invalid_argument("--splits needs three comma-separated ratios");
  for (double p : parts)
    if (p < 0.0) throw std::invalid_argument("split ratios must be non-negative");
  if (std::abs(parts[0] + parts[1] + parts[2] - 1.0) > 1e-6)
    throw std::invalid_argument("split ratios must sum to 1");
  return {parts[0], parts[1], parts[2]};
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  // The small epsilon keeps e.g. 0.7 * 10 = 7.000000000000001 and
  // 0.29 * 100 = 28.999999999999996 on the intended side of the floor.
  auto part = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  const std::size_t train = std::min(part(ratios.train), n);
  const std::size_t valid = std::min(part(ratios.valid), n - train);
  return {train, valid, n - train - valid};
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

DatasetTriple make_triple(const Article& article, const std::vector<Token>& outline, bool drop_first_sentence) {
  DatasetTriple t;
  t.prompt = article.paragraphs.front().front();
  t.outline = outline;
  if (!drop_first_sentence) {
    t.article = serialize_body(article);
    return t;
  }
  Article rest = article;
  auto& first = rest.paragraphs.front();
  first.erase(first.begin());
  if (first.empty()) rest.paragraphs.erase(rest.paragraphs.begin());
  t.article = serialize_body(rest);
  return t;
}

Dataset build_dataset(const std::vector<Article>& articles, const std::vector<std::vector<Token>>& outlines,
                      const DatasetOptions& options) {
  if (articles.size() != outlines.size())
    throw AlignmentError(std::to_string(articles.size()) + " articles but " + std::to_string(outlines.size()) +
                         " outlines");
  const auto sizes = split_sizes(articles.size(), options.ratios);
  const auto order = seeded_permutation(articles.size(), options.seed);
  Dataset ds;
  std::array<std::vector<DatasetTriple>*, 3> splits = {&ds.train, &ds.valid, &ds.test};
  std::size_t pos = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < sizes[s]; ++i, ++pos) {
      const std::size_t a = order[pos];
      auto triple = make_triple(articles[a], outlines[a], options.drop_first_sentence);
      triple.source_index = a;
      splits[s]->push_back(std::move(triple));
    }
  }
  return ds;
}

void write_token_lines(const std::filesystem::path& path, const std::vector<std::vector<Token>>& lines) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : lines) out << join(l) << '\n';
}

std::vector<std::vector<Token>> read_token_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::vector<Token>> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(split_whitespace(line));
  return out;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  const std::array<const std::vector<DatasetTriple>*, 3> splits = {&dataset.train, &dataset.valid, &dataset.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<std::vector<Token>> prompts, outlines, articles;
    for (const auto& t : *splits[s]) {
      prompts.push_back(t.prompt);
      outlines.push_back(t.outline);
      articles.push_back(t.article);
    }
    const std::string name = kSplitNames[s];
    write_token_lines(dir / (name + ".prompt"), prompts);
    write_token_lines(dir / (name + ".outline"), outlines);
    write_token_lines(dir / (name + ".article"), articles);
  }
}

}  // namespace hiergen
