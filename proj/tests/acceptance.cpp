// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "hiergen/attention.hpp"
#include "hiergen/checkpoint.hpp"
#include "hiergen/cli.hpp"
#include "hiergen/gradcheck.hpp"
#include "hiergen/outline.hpp"
#include "hiergen/pipeline.hpp"
#include "hiergen/porter.hpp"
#include "hiergen/synthetic.hpp"
#include "hiergen/task.hpp"
#include "hiergen/train.hpp"
#include "oracles.hpp"
#include "porter_fixture.hpp"

using namespace hiergen;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

int failures = 0;
std::vector<int> selected;  // empty runs everything

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  char time[32];
  std::snprintf(time, sizeof time, "%.1fs", seconds_since(start));
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << name << "  (" << time
            << (o.detail.empty() ? "" : "; " + o.detail) << ")" << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

const fs::path kScratch = fs::path(HIERGEN_SCRATCH_DIR) / "acceptance";

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hiergen");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

double field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + "\t", 0) == 0) return std::stod(line.substr(key.size() + 1));
  throw std::runtime_error("no '" + key + "' line in output");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Generated corpus -> prep -> outline -> dataset under `dir`.
void prepare_corpus(const fs::path& dir, const SyntheticOptions& opt) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text(dir / "raw.txt", generate_synthetic_corpus(opt));
  const std::string d = dir.string(), seed = std::to_string(opt.seed);
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"prep", "--input", d + "/raw.txt", "--out", d + "/prep"},
           {"outline", "--corpus", d + "/prep/corpus.txt", "--out", d + "/outlines.txt"},
           {"dataset", "--corpus", d + "/prep/corpus.txt", "--outlines", d + "/outlines.txt", "--out", d + "/data",
            "--seed", seed}}) {
    const auto r = cli(args);
    if (r.code != 0) throw std::runtime_error(args[0] + " failed: " + r.err);
  }
}

// ---------------------------------------------------------------------------

Outcome perplexity_suite() {
  Outcome o;
  const auto start = Clock::now();
  const std::vector<double> perfect(100, 1.0);
  const double p1 = eval_from_probabilities(perfect).perplexity();
  o.require(p1 == 1.0, "perfect model gives " + fmt(p1));
  const std::vector<double> uniform(1000, 1.0 / 50);
  const double p50 = eval_from_probabilities(uniform).perplexity();
  o.require(std::abs(p50 - 50.0) <= 1e-9, "uniform |V|=50 gives " + fmt(p50));
  const std::vector<double> hand = {0.5, 0.125};
  const double p4 = eval_from_probabilities(hand).perplexity();
  o.require(std::abs(p4 - 4.0) <= 1e-12, "(1/2, 1/8) gives " + fmt(p4));
  o.require(seconds_since(start) < 1.0, "slower than 1 s");
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  const auto start = Clock::now();
  const auto layers = run_gradcheck_suite(20, 2024);
  o.require(layers.size() >= 6, "too few layers checked");
  double worst = 0;
  for (const auto& l : layers) {
    o.require(l.configurations >= 20, l.layer + " checked in only " + std::to_string(l.configurations) + " configs");
    o.require(l.max_rel_error < 1e-4, l.layer + " relative error " + fmt(l.max_rel_error));
    worst = std::max(worst, l.max_rel_error);
  }
  o.require(seconds_since(start) < 120.0, "slower than 2 min");
  if (o.pass) o.detail = std::to_string(layers.size()) + " layers, worst " + fmt(worst);
  return o;
}

std::vector<Span> random_spans(Rng& rng, std::size_t n) {
  std::vector<Span> spans;
  std::size_t begin = 0;
  while (begin < n) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.below(std::min<std::size_t>(n - begin, 6)));
    spans.push_back({begin, begin + len});
    begin += len;
  }
  return spans;
}

Tensor<double> random_tensor(Rng& rng, Shape shape, double scale) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

Outcome hierarchical_attention() {
  Outcome o;
  Rng rng(99);
  double worst_sum = 0, worst_degenerate = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(20), d = 1 + rng.below(6), t = 1 + rng.below(4);
    const auto spans = random_spans(rng, n);
    const auto enc = random_tensor(rng, {n, d}, 2.0);
    const auto queries = random_tensor(rng, {t, d}, 2.0);
    const auto gate = GateWeights<double>::random(d, static_cast<std::uint64_t>(trial));
    for (auto norm : {HierNorm::kSentence, HierNorm::kGlobal}) {
      Graph<double> g(false);
      const auto att = hier_attention(g, g.constant(queries), g.constant(enc), spans, gate.bind(g), norm);
      const auto& w = g.value(att.word_weights);
      for (std::size_t r = 0; r < t; ++r) {
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) sum += w(r, i);
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        const auto v = hier_attention(std::span<const double>(queries.row(r), d), enc, spans, gate, norm);
        worst_sum = std::max(worst_sum, std::abs(std::accumulate(v.word_weights.begin(), v.word_weights.end(), 0.0) - 1.0));
      }
    }
    // One word per sentence: sentence-normalized hierarchical attention is flat attention.
    std::vector<Span> singles;
    for (std::size_t i = 0; i < n; ++i) singles.push_back({i, i + 1});
    Graph<double> g(false);
    const auto h = hier_attention(g, g.constant(queries), g.constant(enc), singles, gate.bind(g), HierNorm::kSentence);
    const auto f = gated_attention(g, g.constant(queries), g.constant(enc), gate.bind(g));
    for (auto [a, b] : {std::pair{h.word_weights, f.word_weights}, std::pair{h.context, f.context}}) {
      const auto& x = g.value(a);
      const auto& y = g.value(b);
      for (std::size_t i = 0; i < x.size(); ++i) worst_degenerate = std::max(worst_degenerate, std::abs(x.data[i] - y.data[i]));
    }
  }
  o.require(worst_sum <= 1e-9, "word weights off by " + fmt(worst_sum));
  o.require(worst_degenerate <= 1e-6, "single-word sentences differ from flat by " + fmt(worst_degenerate));
  return o;
}

Outcome sumbasic_oracle() {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(500);
  std::vector<Article> docs;
  for (int i = 0; i < 500; ++i) docs.push_back(oracle::random_document(rng, 5));
  const DfTable df = build_df_table(docs);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < docs.size(); ++i)
    for (std::size_t k = 1; k <= 3; ++k)
      for (auto mode : {Weighting::kFreq, Weighting::kTfidf}) {
        const auto expected = oracle::sumbasic(docs[i], k, mode, &df);
        o.require(!expected.empty(), "oracle found no unique selection for document " + std::to_string(i));
        const auto got = extract_outline(docs[i], k, mode, &df);
        std::vector<SentenceRef> refs;
        for (const auto& r : got.provenance) refs.push_back({r.paragraph, r.sentence});
        o.require(refs == expected, "document " + std::to_string(i) + " k=" + std::to_string(k) + " " + to_string(mode));
        ++compared;
      }
  o.require(seconds_since(start) < 30.0, "slower than 30 s");
  if (o.pass) o.detail = std::to_string(compared) + " extractions";
  return o;
}

Outcome porter() {
  Outcome o;
  const auto& cases = porter_fixture();
  o.require(cases.size() >= 30, "fixture too small");
  for (const auto& [word, stem] : cases) {
    const auto got = porter_stem(word);
    o.require(got == stem, word + " -> " + got + ", expected " + stem);
  }
  if (o.pass) o.detail = std::to_string(cases.size()) + " pairs";
  return o;
}

Outcome meta_paragraphs() {
  Outcome o;
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> sizes(rng.below(10));
    for (auto& s : sizes) s = 1 + rng.below(6);
    const std::size_t k = 1 + rng.below(5);
    const auto got = aggregate_sizes(sizes, k);
    const std::string tag = "trial " + std::to_string(trial);
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    o.require(std::accumulate(got.begin(), got.end(), std::size_t{0}) == total, tag + ": sentences lost");
    // Group boundaries fall on paragraph boundaries.
    std::vector<std::size_t> bounds;
    std::size_t acc = 0;
    for (auto s : sizes) bounds.push_back(acc += s);
    acc = 0;
    for (auto g : got) o.require(std::find(bounds.begin(), bounds.end(), acc += g) != bounds.end(), tag + ": split paragraph");
    // Only the last group may fall short of k.
    for (std::size_t i = 0; i + 1 < got.size(); ++i) o.require(got[i] >= k, tag + ": early group smaller than k");
    for (auto g : got) o.require(g >= 1, tag + ": empty group");
    o.require(got == oracle::meta_sizes(sizes, k), tag + ": differs from simulation");
  }
  return o;
}

Outcome toy_reproduction() {
  Outcome o;
  const auto start = Clock::now();
  int outline_wins = 0, hier_wins = 0;
  std::ostringstream table;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticOptions opt;
    opt.articles = 200;
    opt.seed = seed;
    const fs::path dir = kScratch / ("toy" + std::to_string(seed));
    prepare_corpus(dir, opt);
    auto train = [&](const std::string& task, bool hier) {
      std::vector<std::string> args = {"train", "--task", task, "--data", (dir / "data").string(), "--out",
                                       (dir / (task + (hier ? "_hier" : "") + ".ckpt")).string(), "--seed",
                                       std::to_string(seed), "--epochs", "25", "--lr", "5e-3", "--precision", "32"};
      if (hier) args.push_back("--hier-attn");
      const auto r = cli(args);
      if (r.code != 0) throw std::runtime_error("train " + task + " failed: " + r.err);
      return field(r.out, "best_val_ppl");
    };
    const double o2a = train("outline2article", false);
    const double p2a = train("prompt2article", false);
    const double hier = train("outline2article", true);
    outline_wins += o2a < p2a;
    hier_wins += hier <= o2a;
    table << " s" << seed << ":" << fmt(o2a) << "/" << fmt(p2a) << "/" << fmt(hier);
  }
  const double elapsed = seconds_since(start);
  o.require(outline_wins >= 4, "outline2article better in " + std::to_string(outline_wins) + "/5 seeds");
  o.require(hier_wins >= 3, "hierarchical no worse in " + std::to_string(hier_wins) + "/5 seeds");
  o.require(elapsed < 1800.0, "slower than 30 min");
  o.detail = (o.detail.empty() ? "" : o.detail + ";") + " o2a<p2a " + std::to_string(outline_wins) + "/5, hier<=flat " +
             std::to_string(hier_wins) + "/5; o2a/p2a/hier" + table.str();
  return o;
}

ModelConfig bound_config(std::size_t src, std::size_t tgt, std::uint64_t seed) {
  ModelConfig c;
  c.source_vocab = src;
  c.target_vocab = tgt;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.max_positions = 40;
  c.seed = seed;
  return c;
}

Seq2SeqModel<double> sharpened(const ModelConfig& c) {
  Seq2SeqModel<double> m(c);
  Rng rng(c.seed + 17);
  for (auto& [name, t] : m.parameters())
    for (auto& v : t.data) v = 0.8 * rng.normal();
  m.parameters().at("dec.out.b").data[kEosId] = 1.5;
  return m;
}

Outcome lower_bound() {
  Outcome o;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const auto om = sharpened(bound_config(10, 12, 100 + trial));
    const auto am = sharpened(bound_config(12, 11, 200 + trial));
    const std::vector<TokenId> prompt = {5, 6, 7, kEosId};
    const std::vector<TokenId> article = {5, 8, 2, 9, 10, kEosId};
    DecodeConfig c;
    c.top_k = 5;
    c.max_len = 15;
    const auto one = doc_loglik_lower_bound(om, am, prompt, article, 1, 7 * trial, c);
    const auto outline = with_eos(one.outlines[0]);
    const double direct = sequence_logprob(om, prompt, outline) + sequence_logprob(am, outline, article);
    o.require(std::abs(one.log2_prob - direct) <= 1e-9, "n=1 differs from the direct sum by " + fmt(one.log2_prob - direct));
    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n <= 8; ++n) {
      const auto b = doc_loglik_lower_bound(om, am, prompt, article, n, 7 * trial, c);
      o.require(b.log2_prob <= 0.0, "bound above zero");
      o.require(b.log2_prob >= previous, "bound decreased at n=" + std::to_string(n));
      previous = b.log2_prob;
    }
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  SyntheticOptions opt;
  opt.articles = 40;
  opt.seed = 9;
  const fs::path dir = kScratch / "determinism";
  prepare_corpus(dir, opt);
  const std::string d = dir.string();
  for (const auto& task : {std::string("prompt2outline"), std::string("outline2article")}) {
    const auto r = cli({"train", "--task", task, "--data", d + "/data", "--out", d + "/" + task + ".ckpt", "--epochs", "2",
                        "--set", "embed_dim=16", "--set", "hidden_dim=16", "--hier-attn"});
    if (r.code != 0) throw std::runtime_error("train failed: " + r.err);
  }
  for (const auto& [run, jobs] : {std::pair{"run1", "1"}, std::pair{"run2", "4"}}) {
    const auto r = cli({"--jobs", jobs, "pipeline", "--outline-model", d + "/prompt2outline.ckpt", "--article-model",
                        d + "/outline2article.ckpt", "--prompts", d + "/data/test.prompt", "--out", d + "/" + run,
                        "--outline-max-len", "60", "--article-max-len", "120", "--seed", "3"});
    if (r.code != 0) throw std::runtime_error("pipeline failed: " + r.err);
  }
  for (const char* f : {"gen.outline", "gen.article", "gen.meta"})
    o.require(slurp(dir / "run1" / f) == slurp(dir / "run2" / f), std::string(f) + " differs between runs");

  const auto data = load_split(dir / "data", "test", Task::kOutlineToArticle,
                               load_checkpoint<float>(dir / "outline2article.ckpt").source_vocab,
                               load_checkpoint<float>(dir / "outline2article.ckpt").target_vocab, 1024);
  const auto first = load_checkpoint<float>(dir / "outline2article.ckpt");
  save_checkpoint(dir / "copy.ckpt", first.model, first.source_vocab, first.target_vocab, first.task);
  const auto second = load_checkpoint<float>(dir / "copy.ckpt");
  const double a = evaluate(first.model, data).perplexity();
  const double b = evaluate(second.model, data).perplexity();
  o.require(a == b, "perplexity changed across a checkpoint round trip: " + fmt(a) + " vs " + fmt(b));
  o.require(slurp(dir / "outline2article.ckpt") == slurp(dir / "copy.ckpt"), "re-saved checkpoint differs");
  return o;
}

int shell(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end() {
  Outcome o;
  const auto start = Clock::now();
  const fs::path dir = kScratch / "smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SyntheticOptions opt;
  opt.articles = 60;
  opt.seed = 21;
  write_text(dir / "raw.txt", generate_synthetic_corpus(opt));
  const std::string bin = HIERGEN_CLI_PATH, d = dir.string(), log = " >> " + d + "/log.txt 2>&1";
  const std::vector<std::string> steps = {
      bin + " prep --input " + d + "/raw.txt --out " + d + "/prep",
      bin + " outline --corpus " + d + "/prep/corpus.txt --out " + d + "/outlines.txt",
      bin + " dataset --corpus " + d + "/prep/corpus.txt --outlines " + d + "/outlines.txt --out " + d + "/data",
      bin + " train --task prompt2outline --data " + d + "/data --out " + d + "/p2o.ckpt --epochs 2",
      bin + " train --task outline2article --hier-attn --data " + d + "/data --out " + d + "/o2a.ckpt --epochs 2",
      bin + " pipeline --outline-model " + d + "/p2o.ckpt --article-model " + d + "/o2a.ckpt --prompts " + d +
          "/data/test.prompt --out " + d + "/gen --outline-max-len 100 --article-max-len 300",
  };
  for (const auto& step : steps) {
    const int code = shell(step + log);
    o.require(code == 0, "exit " + std::to_string(code) + ": " + step.substr(bin.size() + 1, 40));
    if (!o.pass) return o;
  }
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  const auto prompts = count(slurp(dir / "data/test.prompt"));
  for (const char* f : {"gen.outline", "gen.article", "gen.meta"})
    o.require(count(slurp(dir / "gen" / f)) == prompts, std::string(f) + " is not line-aligned with the prompts");
  o.require(seconds_since(start) < 600.0, "slower than 10 min");
  return o;
}

}  // namespace

// Optional arguments pick criteria by number.
int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  fs::create_directories(kScratch);
  report(1, "perplexity hand cases", perplexity_suite);
  report(2, "gradient checks for every layer", gradient_checks);
  report(3, "hierarchical attention weights", hierarchical_attention);
  report(4, "SumBasic brute-force oracle", sumbasic_oracle);
  report(5, "Porter stemmer fixture", porter);
  report(6, "meta-paragraph invariants", meta_paragraphs);
  report(7, "toy outline and hierarchy ordering", toy_reproduction);
  report(8, "document lower bound", lower_bound);
  report(9, "pipeline and checkpoint determinism", determinism);
  report(10, "end-to-end CLI smoke", end_to_end);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}
