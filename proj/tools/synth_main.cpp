// Writes a seeded toy Wikitext corpus to stdout or --out.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "hiergen/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Seeded templated corpus generator", "hiergen-synth"};
  hiergen::SyntheticOptions opt;
  std::string out;
  app.add_option("--articles", opt.articles)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--seed", opt.seed)->capture_default_str();
  app.add_option("--topics", opt.topics, "Topic-word pool size")->capture_default_str()->check(CLI::Range(2, 48));
  app.add_option("--article-topics", opt.article_topics, "Topic words per article")->capture_default_str()->check(CLI::Range(2, 48));
  app.add_option("--min-paragraphs", opt.min_paragraphs)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--max-paragraphs", opt.max_paragraphs)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--min-sentences", opt.min_sentences)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--max-sentences", opt.max_sentences)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output file (default stdout)");
  CLI11_PARSE(app, argc, argv);
  const std::string text = hiergen::generate_synthetic_corpus(opt);
  if (out.empty()) {
    std::cout << text;
    return 0;
  }
  std::ofstream file(out, std::ios::binary);
  if (!file) {
    std::cerr << "error: cannot write " << out << '\n';
    return 2;
  }
  file << text;
  return 0;
}
