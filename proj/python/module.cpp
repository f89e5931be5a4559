#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "hiergen/checkpoint.hpp"
#include "hiergen/cli.hpp"
#include "hiergen/corpus.hpp"
#include "hiergen/errors.hpp"
#include "hiergen/gradcheck.hpp"
#include "hiergen/outline.hpp"
#include "hiergen/pipeline.hpp"
#include "hiergen/porter.hpp"
#include "hiergen/synthetic.hpp"
#include "hiergen/task.hpp"
#include "hiergen/train.hpp"

namespace py = pybind11;
using namespace hiergen;

namespace {

using Tokens = std::vector<Token>;

DecodeConfig decode_config(std::size_t top_k, double temperature, std::size_t max_len, std::uint64_t seed) {
  DecodeConfig c;
  c.top_k = top_k;
  c.temperature = temperature;
  c.max_len = max_len;
  c.seed = seed;
  return c;
}

// Checkpoints are evaluated at 64 bits whatever their stored precision.
struct Model {
  LoadedModel<double> loaded;

  explicit Model(const std::filesystem::path& path) : loaded(load_checkpoint<double>(path)) {}

  std::vector<TokenId> source_ids(const Tokens& source) const { return with_eos(encode(source, loaded.source_vocab)); }

  Tokens generate(const Tokens& source, std::size_t top_k, double temperature, std::size_t max_len,
                  std::uint64_t seed) const {
    const auto c = decode_config(top_k, temperature, max_len, seed);
    py::gil_scoped_release release;
    return hiergen::decode(hiergen::decode(loaded.model, source_ids(source), c), loaded.target_vocab);
  }

  double logprob(const Tokens& source, const Tokens& target) const {
    const auto t = with_eos(encode(target, loaded.target_vocab));
    return sequence_logprob(loaded.model, source_ids(source), t);
  }

  double perplexity(const std::filesystem::path& data, const std::string& split, std::size_t jobs) const {
    const auto examples = load_split(data, split, parse_task(loaded.task), loaded.source_vocab, loaded.target_vocab,
                                     loaded.model.config().max_positions);
    py::gil_scoped_release release;
    return evaluate(loaded.model, examples, jobs).perplexity();
  }
};

py::dict record_dict(const GenerationRecord& r) {
  py::dict d;
  d["prompt"] = r.prompt;
  d["outline"] = r.generated_outline;
  d["article"] = r.generated_article;
  d["seed"] = r.seed;
  d["top_k"] = r.top_k;
  d["degenerate"] = r.degenerate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical outline-then-article generation";

  py::register_exception<Error>(m, "HiergenError", PyExc_RuntimeError);

  m.def("porter_stem", [](const std::string& w) { return porter_stem(w); });
  m.def("is_stop_word", [](const std::string& w) { return is_stop_word(w); });
  m.def("aggregate_sizes", &aggregate_sizes, py::arg("paragraph_sizes"), py::arg("k"));

  m.def(
      "clean_corpus",
      [](const std::string& text) {
        std::vector<std::string> lines;
        for (const auto& raw : parse_corpus(text)) lines.push_back(format_corpus_line(clean_article(raw)));
        return lines;
      },
      py::arg("text"), "Cleans wikitext into one-article-per-line corpus lines.");

  m.def(
      "outline",
      [](const std::vector<std::string>& corpus_lines, std::size_t k, const std::string& weighting) {
        std::vector<Article> articles;
        for (const auto& line : corpus_lines) articles.push_back(parse_corpus_line(line));
        const Weighting w = parse_weighting(weighting);
        const DfTable df = build_df_table(articles);
        std::vector<std::vector<Tokens>> out;
        for (const auto& a : articles) out.push_back(extract_outline(a, k, w, w == Weighting::kTfidf ? &df : nullptr).sentences);
        return out;
      },
      py::arg("corpus_lines"), py::arg("k") = 3, py::arg("weighting") = "freq",
      "Outline sentences for each corpus line. Document frequencies come from the given lines.");

  m.def(
      "perplexity_from_probabilities",
      [](const std::vector<double>& p) { return eval_from_probabilities(p).perplexity(); }, py::arg("probabilities"));

  m.def(
      "synthetic_corpus",
      [](std::size_t articles, std::uint64_t seed) {
        SyntheticOptions o;
        o.articles = articles;
        o.seed = seed;
        return generate_synthetic_corpus(o);
      },
      py::arg("articles") = 200, py::arg("seed") = 1);

  m.def(
      "gradcheck",
      [](std::size_t configurations, std::uint64_t seed) {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& c : run_gradcheck_suite(configurations, seed)) out.emplace_back(c.layer, c.max_rel_error);
        return out;
      },
      py::arg("configurations") = 5, py::arg("seed") = 1, "Worst relative gradient error per layer.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "hiergen");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a hiergen subcommand in process; returns (exit_code, stdout, stderr).");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("path"))
      .def_property_readonly("task", [](const Model& s) { return s.loaded.task; })
      .def_property_readonly("source_vocab", [](const Model& s) { return s.loaded.source_vocab.tokens(); })
      .def_property_readonly("target_vocab", [](const Model& s) { return s.loaded.target_vocab.tokens(); })
      .def_property_readonly("parameter_count", [](const Model& s) { return s.loaded.model.parameter_count(); })
      .def("generate", &Model::generate, py::arg("source"), py::arg("top_k") = 10, py::arg("temperature") = 1.0,
           py::arg("max_len") = 400, py::arg("seed") = 1)
      .def("logprob", &Model::logprob, py::arg("source"), py::arg("target"),
           "log2 probability of target (eos appended) given source.")
      .def("perplexity", &Model::perplexity, py::arg("data"), py::arg("split") = "test", py::arg("jobs") = 1);

  m.def(
      "generate_pipeline",
      [](const Model& outline, const Model& article, const Tokens& prompt, std::size_t top_k, double temperature,
         std::size_t outline_max_len, std::size_t article_max_len, std::uint64_t seed) {
        const auto oc = decode_config(top_k, temperature, outline_max_len, seed);
        const auto ac = decode_config(top_k, temperature, article_max_len, seed);
        GenerationRecord r;
        {
          py::gil_scoped_release release;
          r = two_phase_generate(outline.loaded, article.loaded, prompt, oc, ac);
        }
        return record_dict(r);
      },
      py::arg("outline_model"), py::arg("article_model"), py::arg("prompt"), py::arg("top_k") = 10,
      py::arg("temperature") = 1.0, py::arg("outline_max_len") = 100, py::arg("article_max_len") = 400,
      py::arg("seed") = 1);

  m.def(
      "doc_lower_bound",
      [](const Model& outline, const Model& article, const Tokens& prompt, const Tokens& text, std::size_t samples,
         std::uint64_t seed, std::size_t top_k, std::size_t max_len) {
        check_chain(outline.loaded, article.loaded);
        const auto c = decode_config(top_k, 1.0, max_len, seed);
        const auto b = doc_loglik_lower_bound(outline.loaded.model, article.loaded.model, outline.source_ids(prompt),
                                              with_eos(encode(text, article.loaded.target_vocab)), samples, seed, c);
        return py::make_tuple(b.log2_prob, b.sample_scores);
      },
      py::arg("outline_model"), py::arg("article_model"), py::arg("prompt"), py::arg("article"), py::arg("samples") = 8,
      py::arg("seed") = 1, py::arg("top_k") = 10, py::arg("max_len") = 100,
      "Returns (log2 bound, per-sample log2 scores).");
}
