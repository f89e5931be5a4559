#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hiergen/corpus.hpp"
#include "hiergen/outline.hpp"

namespace hiergen {

struct DatasetTriple {
  std::vector<Token> prompt;
  std::vector<Token> outline;
  std::vector<Token> article;
  // Index of the source article in the corpus.
  std::size_t source_index = 0;
};

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

SplitRatios parse_splits(const std::string& text);  // "0.8,0.1,0.1"

// floor(ratio * n) for train and valid; test takes the remainder.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

struct Dataset {
  std::vector<DatasetTriple> train;
  std::vector<DatasetTriple> valid;
  std::vector<DatasetTriple> test;
};

struct DatasetOptions {
  SplitRatios ratios;
  std::uint64_t seed = 1;
  // Start the article target after the prompt sentence.
  bool drop_first_sentence = false;
};

DatasetTriple make_triple(const Article& article, const std::vector<Token>& outline, bool drop_first_sentence);

// `outlines[i]` is the serialized outline of `articles[i]`. Throws
// AlignmentError on length mismatch.
Dataset build_dataset(const std::vector<Article>& articles, const std::vector<std::vector<Token>>& outlines,
                      const DatasetOptions& options);

inline constexpr std::array<const char*, 3> kSplitNames = {"train", "valid", "test"};

// Writes {split}.prompt / .outline / .article for each split.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

// Reads a line-per-example token file.
std::vector<std::vector<Token>> read_token_lines(const std::filesystem::path& path);
void write_token_lines(const std::filesystem::path& path, const std::vector<std::vector<Token>>& lines);

// Deterministic Fisher-Yates shuffle of 0..n-1 driven by a 64-bit Mersenne twister.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace hiergen
