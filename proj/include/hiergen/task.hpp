#pragma once

// Mapping from the three training tasks to dataset files and model examples.

#include <filesystem>
#include <string>
#include <vector>

#include "hiergen/model.hpp"
#include "hiergen/vocab.hpp"

namespace hiergen {

enum class Task { kPromptToOutline, kOutlineToArticle, kPromptToArticle };

Task parse_task(const std::string& name);  // prompt2outline | outline2article | prompt2article
std::string to_string(Task task);
std::string source_suffix(Task task);  // "prompt" or "outline"
std::string target_suffix(Task task);  // "outline" or "article"

// Encodes aligned token lines. Each side keeps at most max_len - 1 tokens
// before the appended eos. Throws AlignmentError on a length mismatch.
std::vector<Example> make_examples(const std::vector<std::vector<Token>>& sources,
                                   const std::vector<std::vector<Token>>& targets, const Vocabulary& source_vocab,
                                   const Vocabulary& target_vocab, std::size_t max_len);

// Reads {dir}/{split}.{source} and {dir}/{split}.{target}.
std::vector<Example> load_split(const std::filesystem::path& dir, const std::string& split, Task task,
                                const Vocabulary& source_vocab, const Vocabulary& target_vocab, std::size_t max_len);

}  // namespace hiergen
