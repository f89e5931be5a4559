#include "hiergen/task.hpp"

#include <stdexcept>

#include "hiergen/dataset.hpp"

namespace hiergen {

Task parse_task(const std::string& name) {
  if (name == "prompt2outline") return Task::kPromptToOutline;
  if (name == "outline2article") return Task::kOutlineToArticle;
  if (name == "prompt2article") return Task::kPromptToArticle;
  throw std::invalid_argument("unknown task '" + name + "'");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::kPromptToOutline:
      return "prompt2outline";
    case Task::kOutlineToArticle:
      return "outline2article";
    default:
      return "prompt2article";
  }
}

std::string source_suffix(Task task) { return task == Task::kOutlineToArticle ? "outline" : "prompt"; }
std::string target_suffix(Task task) { return task == Task::kPromptToOutline ? "outline" : "article"; }

namespace {

std::vector<TokenId> encode_capped(const std::vector<Token>& tokens, const Vocabulary& vocab, std::size_t max_len) {
  const std::size_t keep = std::min(tokens.size(), max_len - 1);
  auto ids = encode(std::span<const Token>(tokens.data(), keep), vocab);
  ids.push_back(kEosId);
  return ids;
}

}  // namespace

std::vector<Example> make_examples(const std::vector<std::vector<Token>>& sources,
                                   const std::vector<std::vector<Token>>& targets, const Vocabulary& source_vocab,
                                   const Vocabulary& target_vocab, std::size_t max_len) {
  if (sources.size() != targets.size())
    throw AlignmentError(std::to_string(sources.size()) + " source lines but " + std::to_string(targets.size()) +
                         " target lines");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  std::vector<Example> out;
  out.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i)
    out.push_back({encode_capped(sources[i], source_vocab, max_len), encode_capped(targets[i], target_vocab, max_len)});
  return out;
}

std::vector<Example> load_split(const std::filesystem::path& dir, const std::string& split, Task task,
                                const Vocabulary& source_vocab, const Vocabulary& target_vocab, std::size_t max_len) {
  return make_examples(read_token_lines(dir / (split + "." + source_suffix(task))),
                       read_token_lines(dir / (split + "." + target_suffix(task))), source_vocab, target_vocab,
                       max_len);
}

}  // namespace hiergen
