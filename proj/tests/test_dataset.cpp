#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "hiergen/dataset.hpp"
#include "hiergen/errors.hpp"
#include "hiergen/task.hpp"

using namespace hiergen;
namespace fs = std::filesystem;

namespace {

Article numbered(std::size_t i) {
  const std::string w = "w" + std::string(1, static_cast<char>('a' + i % 26));
  return Article{{"t"}, {Paragraph{Sentence{w, "first", "."}, Sentence{"second", "."}}, Paragraph{Sentence{"third", "."}}}};
}

}  // namespace

TEST_CASE("split sizes: floor plus remainder") {
  CHECK(split_sizes(10, {0.8, 0.1, 0.1}) == std::array<std::size_t, 3>{8, 1, 1});
  CHECK(split_sizes(7, {0.8, 0.1, 0.1}) == std::array<std::size_t, 3>{5, 0, 2});
  CHECK(split_sizes(10, {0.7, 0.2, 0.1}) == std::array<std::size_t, 3>{7, 2, 1});
  CHECK(split_sizes(100, {0.29, 0.71, 0.0}) == std::array<std::size_t, 3>{29, 71, 0});
  CHECK(split_sizes(0, {0.8, 0.1, 0.1}) == std::array<std::size_t, 3>{0, 0, 0});
}

TEST_CASE("parse_splits") {
  const auto r = parse_splits("0.8,0.1,0.1");
  CHECK(r.train == 0.8);
  CHECK_THROWS_AS(parse_splits("0.8,0.1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_splits("0.8,0.3,0.1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_splits("a,b,c"), std::invalid_argument);
  CHECK_THROWS_AS(parse_splits("1.2,-0.1,-0.1"), std::invalid_argument);
}

TEST_CASE("seeded permutation") {
  const auto p = seeded_permutation(50, 4);
  CHECK(p == seeded_permutation(50, 4));
  CHECK(p != seeded_permutation(50, 5));
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("make_triple") {
  const Article a = numbered(0);
  const auto t = make_triple(a, {"o", "newline", "p"}, false);
  CHECK(t.prompt == Sentence{"wa", "first", "."});
  CHECK(t.outline == std::vector<Token>{"o", "newline", "p"});
  CHECK(t.article == std::vector<Token>{"wa", "first", ".", "second", ".", "newline", "third", "."});
  const auto d = make_triple(a, {}, true);
  CHECK(d.article == std::vector<Token>{"second", ".", "newline", "third", "."});
  const Article single{{"t"}, {Paragraph{Sentence{"only", "."}}, Paragraph{Sentence{"next", "."}}}};
  CHECK(make_triple(single, {}, true).article == std::vector<Token>{"next", "."});
}

TEST_CASE("build_dataset aligns and partitions") {
  std::vector<Article> articles;
  std::vector<std::vector<Token>> outlines;
  for (std::size_t i = 0; i < 10; ++i) {
    articles.push_back(numbered(i));
    outlines.push_back({"outline" + std::to_string(i)});
  }
  const Dataset ds = build_dataset(articles, outlines, {});
  CHECK(ds.train.size() == 8);
  CHECK(ds.valid.size() == 1);
  CHECK(ds.test.size() == 1);
  std::set<std::size_t> seen;
  for (const auto* split : {&ds.train, &ds.valid, &ds.test})
    for (const auto& t : *split) {
      seen.insert(t.source_index);
      CHECK(t.outline == outlines[t.source_index]);
      CHECK(t.prompt == articles[t.source_index].paragraphs[0][0]);
    }
  CHECK(seen.size() == 10);

  outlines.pop_back();
  CHECK_THROWS_AS(build_dataset(articles, outlines, {}), AlignmentError);
}

TEST_CASE("dataset files and task examples") {
  const fs::path dir = fs::path(HIERGEN_SCRATCH_DIR) / "dataset";
  fs::remove_all(dir);
  std::vector<Article> articles;
  std::vector<std::vector<Token>> outlines;
  for (std::size_t i = 0; i < 10; ++i) {
    articles.push_back(numbered(i));
    outlines.push_back({"third", ".", "newline", "first"});
  }
  const Dataset ds = build_dataset(articles, outlines, {});
  write_dataset(dir, ds);
  for (const char* split : kSplitNames)
    for (const char* kind : {"prompt", "outline", "article"}) CHECK(fs::exists(dir / (std::string(split) + "." + kind)));
  const auto prompts = read_token_lines(dir / "train.prompt");
  REQUIRE(prompts.size() == 8);
  CHECK(prompts[0] == ds.train[0].prompt);

  const Vocabulary v = build_vocab(articles, 1);
  const auto ex = load_split(dir, "train", Task::kOutlineToArticle, v, v, 1024);
  REQUIRE(ex.size() == 8);
  CHECK(ex[0].source == std::vector<TokenId>{v.id("third"), v.id("."), kNewlineId, v.id("first"), kEosId});
  CHECK(ex[0].target.back() == kEosId);
  const auto capped = load_split(dir, "train", Task::kPromptToArticle, v, v, 3);
  CHECK(capped[0].source.size() == 3);
  CHECK(capped[0].target == std::vector<TokenId>{v.id(ds.train[0].article[0]), v.id("first"), kEosId});
  CHECK_THROWS_AS(load_split(dir, "missing", Task::kPromptToOutline, v, v, 10), IoError);
  fs::remove_all(dir);
}

TEST_CASE("task names") {
  for (auto t : {Task::kPromptToOutline, Task::kOutlineToArticle, Task::kPromptToArticle})
    CHECK(parse_task(to_string(t)) == t);
  CHECK_THROWS_AS(parse_task("x"), std::invalid_argument);
  CHECK(source_suffix(Task::kOutlineToArticle) == "outline");
  CHECK(target_suffix(Task::kPromptToOutline) == "outline");
}
