#include "hiergen/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hiergen/checkpoint.hpp"
#include "hiergen/corpus.hpp"
#include "hiergen/dataset.hpp"
#include "hiergen/gradcheck.hpp"
#include "hiergen/outline.hpp"
#include "hiergen/parallel.hpp"
#include "hiergen/pipeline.hpp"
#include "hiergen/task.hpp"
#include "hiergen/train.hpp"
#include "hiergen/vocab.hpp"

namespace hiergen {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

Vocabulary load_vocab(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return Vocabulary::load(in);
}

std::vector<Article> load_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_corpus(in);
}

template <typename Fn>
auto with_checkpoint(const fs::path& path, Fn&& fn) {
  if (checkpoint_precision(path) == Precision::kF64) return fn(load_checkpoint<double>(path));
  return fn(load_checkpoint<float>(path));
}

// ---- prep

struct PrepArgs {
  std::string input, out;
  std::uint64_t min_freq = 3;
};

void run_prep(const PrepArgs& a, std::ostream& out) {
  const auto raw = parse_corpus(read_file(a.input));
  std::vector<Article> articles;
  std::size_t skipped = 0;
  for (const auto& r : raw) {
    try {
      articles.push_back(clean_article(r));
    } catch (const EmptyArticle&) {
      ++skipped;
    }
  }
  const Vocabulary vocab = build_vocab(articles, a.min_freq);
  fs::create_directories(a.out);
  auto corpus_out = open_out(fs::path(a.out) / "corpus.txt");
  write_corpus(corpus_out, articles);
  auto vocab_out = open_out(fs::path(a.out) / "vocab.txt");
  vocab.save(vocab_out);
  out << "articles\t" << articles.size() << "\nskipped\t" << skipped << "\nvocab\t" << vocab.size() << '\n';
}

// ---- outline

struct OutlineArgs {
  std::string corpus, out;
  std::size_t k = 3;
  std::string weighting = "freq";
};

void run_outline(const OutlineArgs& a, std::size_t jobs, std::ostream& out) {
  const Weighting mode = parse_weighting(a.weighting);
  const auto articles = load_corpus(a.corpus);
  DfTable df;
  if (mode == Weighting::kTfidf) df = build_df_table(articles);
  std::vector<std::vector<Token>> lines(articles.size());
  parallel_for(articles.size(), jobs,
               [&](std::size_t i) { lines[i] = extract_outline(articles[i], a.k, mode, &df).serialize(); });
  write_token_lines(a.out, lines);
  out << "outlines\t" << lines.size() << '\n';
}

// ---- dataset

struct DatasetArgs {
  std::string corpus, outlines, out;
  std::string splits = "0.8,0.1,0.1";
  std::uint64_t seed = 1;
  std::uint64_t min_freq = 3;
  bool drop_first_sentence = false;
};

void run_dataset(const DatasetArgs& a, std::ostream& out) {
  DatasetOptions opts;
  opts.ratios = parse_splits(a.splits);
  opts.seed = a.seed;
  opts.drop_first_sentence = a.drop_first_sentence;
  const auto articles = load_corpus(a.corpus);
  const auto outlines = read_token_lines(a.outlines);
  const Dataset ds = build_dataset(articles, outlines, opts);
  write_dataset(a.out, ds);
  // Vocabulary from training-split articles only.
  std::vector<Article> train_articles;
  for (const auto& t : ds.train) train_articles.push_back(articles[t.source_index]);
  const Vocabulary vocab = build_vocab(train_articles, a.min_freq);
  auto vocab_out = open_out(fs::path(a.out) / "vocab.txt");
  vocab.save(vocab_out);
  out << "train\t" << ds.train.size() << "\nvalid\t" << ds.valid.size() << "\ntest\t" << ds.test.size()
      << "\nvocab\t" << vocab.size() << '\n';
}

// ---- train

struct TrainArgs {
  std::string task, config, data, out, hier_norm = "sentence", optimizer = "adam", precision = "32", log;
  bool hier_attn = false;
  std::vector<std::string> set;
  OptimConfig optim;
};

template <typename Real>
void train_and_save(const TrainArgs& a, ModelConfig mc, const Vocabulary& vocab, std::ostream& out) {
  const Task task = parse_task(a.task);
  const auto train_data = load_split(a.data, "train", task, vocab, vocab, mc.max_positions);
  const auto valid_data = load_split(a.data, "valid", task, vocab, vocab, mc.max_positions);
  Seq2SeqModel<Real> model(mc);
  out << "parameters\t" << model.parameter_count() << "\ntrain_examples\t" << train_data.size()
      << "\nvalid_examples\t" << valid_data.size() << '\n';
  std::ofstream log;
  if (!a.log.empty()) log = open_out(a.log);
  out << "epoch\tloss\tval_ppl\n";
  const TrainLog result = train(model, train_data, valid_data, a.optim, [&](const EpochLog& e) {
    out << format_epoch(e) << '\n' << std::flush;
    if (log) log << format_epoch(e) << '\n' << std::flush;
  });
  save_checkpoint(a.out, model, vocab, vocab, to_string(task));
  out << "best_epoch\t" << result.best_epoch << "\nbest_val_ppl\t" << std::setprecision(17) << result.best_val_ppl
      << '\n';
}

ModelConfig train_model_config(const TrainArgs& a, const Vocabulary* vocab) {
  ModelConfig mc;
  if (!a.config.empty()) mc.apply(read_file(a.config));
  std::string overrides;
  for (const auto& kv : a.set) overrides += kv + '\n';
  mc.apply(overrides);
  if (a.hier_attn) mc.attention = AttentionKind::kHierarchical;
  mc.hier_norm = parse_hier_norm(a.hier_norm);
  mc.seed = a.optim.seed;
  if (vocab) mc.source_vocab = mc.target_vocab = vocab->size();
  return mc;
}

// ---- perplexity

struct PerplexityArgs {
  std::string model, data, split = "test", task;
};

template <typename Real>
void perplexity_of(const PerplexityArgs& a, const LoadedModel<Real>& m, std::size_t jobs, std::ostream& out) {
  const std::string task_name = a.task.empty() ? m.task : a.task;
  if (task_name.empty()) throw UsageError("checkpoint records no task; pass --task");
  const Task task = parse_task(task_name);
  const auto data = load_split(a.data, a.split, task, m.source_vocab, m.target_vocab, m.model.config().max_positions);
  const EvalResult r = evaluate(m.model, std::span<const Example>(data), jobs);
  out << "task\t" << to_string(task) << "\nsplit\t" << a.split << "\ntokens\t" << r.tokens << "\nperplexity\t"
      << std::setprecision(17) << r.perplexity() << '\n';
}

// ---- generate

struct GenerateArgs {
  std::string model, input, out;
  DecodeConfig decode;
};

template <typename Real>
void generate_with(const GenerateArgs& a, const LoadedModel<Real>& m, std::size_t jobs, std::ostream& out) {
  a.decode.validate(m.target_vocab.size());
  const auto sources = read_token_lines(a.input);
  std::vector<std::string> lines(sources.size());
  parallel_for(sources.size(), jobs, [&](std::size_t i) {
    DecodeConfig cfg = a.decode;
    cfg.seed = a.decode.seed + i;
    const auto src = with_eos(encode(sources[i], m.source_vocab));
    lines[i] = join(hiergen::decode(decode(m.model, src, cfg), m.target_vocab));
  });
  if (a.out.empty() || a.out == "-") {
    for (const auto& l : lines) out << l << '\n';
  } else {
    auto file = open_out(a.out);
    for (const auto& l : lines) file << l << '\n';
  }
}

// ---- pipeline

struct PipelineArgs {
  std::string outline_model, article_model, prompts, out = ".";
  std::size_t top_k = 10, outline_max_len = 400, article_max_len = 1500;
  double temperature = 1.0;
  std::uint64_t seed = 1;
};

template <typename Real>
void pipeline_with(const PipelineArgs& a, const LoadedModel<Real>& om, const LoadedModel<Real>& am, std::size_t jobs,
                   std::ostream& out) {
  check_chain(om, am);
  DecodeConfig oc{a.top_k, a.temperature, a.outline_max_len, a.seed};
  DecodeConfig ac{a.top_k, a.temperature, a.article_max_len, a.seed};
  oc.validate(om.target_vocab.size());
  ac.validate(am.target_vocab.size());
  const auto prompts = read_token_lines(a.prompts);
  std::vector<GenerationRecord> records(prompts.size());
  parallel_for(prompts.size(), jobs, [&](std::size_t i) {
    DecodeConfig o = oc, r = ac;
    o.seed = r.seed = a.seed + i;
    records[i] = two_phase_generate(om, am, prompts[i], o, r);
  });
  fs::create_directories(a.out);
  auto outline_file = open_out(fs::path(a.out) / "gen.outline");
  auto article_file = open_out(fs::path(a.out) / "gen.article");
  auto meta_file = open_out(fs::path(a.out) / "gen.meta");
  std::size_t degenerate = 0;
  for (const auto& r : records) {
    outline_file << join(r.generated_outline) << '\n';
    article_file << join(r.generated_article) << '\n';
    meta_file << format_meta(r) << '\n';
    degenerate += r.degenerate ? 1 : 0;
  }
  out << "records\t" << records.size() << "\ndegenerate\t" << degenerate << '\n';
}

// ---- gradcheck

struct GradcheckArgs {
  std::size_t configurations = 20;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
};

bool run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  bool ok = true;
  out << "layer\tconfigs\tmax_rel_error\tstatus\n";
  for (const auto& c : run_gradcheck_suite(a.configurations, a.seed)) {
    const bool pass = c.max_rel_error <= a.tolerance;
    ok = ok && pass;
    out << c.layer << '\t' << c.configurations << '\t' << std::scientific << std::setprecision(3) << c.max_rel_error
        << std::defaultfloat << '\t' << (pass ? "ok" : "FAIL") << '\n';
  }
  return ok;
}

auto one_of(std::initializer_list<std::string> names) { return CLI::IsMember(std::vector<std::string>(names)); }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-phase prompt -> outline -> article generation toolkit", "hiergen"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t jobs = default_jobs();
  app.add_option("--jobs,-j", jobs, "Worker threads (1 = fully sequential)")->check(CLI::PositiveNumber);

  PrepArgs prep;
  auto* c_prep = app.add_subcommand("prep", "Parse and clean a raw Wikitext dump; write corpus.txt and vocab.txt");
  c_prep->add_option("--input", prep.input, "Raw Wikitext file")->required();
  c_prep->add_option("--out", prep.out, "Output directory")->required();
  c_prep->add_option("--min-freq", prep.min_freq, "Vocabulary frequency threshold")->capture_default_str()->check(CLI::PositiveNumber);

  OutlineArgs outline;
  auto* c_outline = app.add_subcommand("outline", "Extract one topic sentence per meta-paragraph");
  c_outline->add_option("--corpus", outline.corpus, "Cleaned corpus (corpus.txt)")->required();
  c_outline->add_option("--out", outline.out, "Outline file, line-aligned with the corpus")->required();
  c_outline->add_option("--k", outline.k, "Minimum sentences per meta-paragraph")->capture_default_str()->check(CLI::PositiveNumber);
  c_outline->add_option("--weighting", outline.weighting, "Word weighting")->capture_default_str()->check(one_of({"freq", "tfidf"}));

  DatasetArgs dataset;
  auto* c_dataset = app.add_subcommand("dataset", "Split into train/valid/test prompt, outline and article files");
  c_dataset->add_option("--corpus", dataset.corpus, "Cleaned corpus (corpus.txt)")->required();
  c_dataset->add_option("--outlines", dataset.outlines, "Outline file from `outline`")->required();
  c_dataset->add_option("--out", dataset.out, "Output directory")->required();
  c_dataset->add_option("--splits", dataset.splits, "train,valid,test ratios")->capture_default_str();
  c_dataset->add_option("--seed", dataset.seed, "Shuffle seed")->capture_default_str();
  c_dataset->add_option("--min-freq", dataset.min_freq, "Vocabulary frequency threshold")->capture_default_str()->check(CLI::PositiveNumber);
  c_dataset->add_flag("--drop-first-sentence", dataset.drop_first_sentence, "Start article targets after the prompt sentence");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a sequence-to-sequence model");
  c_train->add_option("--task", tr.task, "Source and target files")->required()->check(one_of({"prompt2outline", "outline2article", "prompt2article"}));
  c_train->add_option("--data", tr.data, "Dataset directory from `dataset`")->required();
  c_train->add_option("--out", tr.out, "Checkpoint path")->required();
  c_train->add_option("--config", tr.config, "Model config file (key=value lines)");
  c_train->add_option("--set", tr.set, "Model config override key=value (repeatable)");
  c_train->add_flag("--hier-attn", tr.hier_attn, "Hierarchical encoder attention");
  c_train->add_option("--hier-norm", tr.hier_norm, "Word-weight normalization for hierarchical attention")->capture_default_str()->check(one_of({"sentence", "global"}));
  c_train->add_option("--optimizer", tr.optimizer)->capture_default_str()->check(one_of({"adam", "sgd"}));
  c_train->add_option("--lr", tr.optim.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--momentum", tr.optim.momentum)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--clip", tr.optim.clip_norm, "Gradient-norm clip, 0 disables")->capture_default_str()->check(CLI::NonNegativeNumber);
  c_train->add_option("--batch-size", tr.optim.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--epochs", tr.optim.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--seed", tr.optim.seed, "Initialization and shuffle seed")->capture_default_str();
  c_train->add_option("--precision", tr.precision, "Parameter precision in bits")->capture_default_str()->check(one_of({"32", "64"}));
  c_train->add_option("--log", tr.log, "Also write epoch lines to this file");

  PerplexityArgs ppl;
  auto* c_ppl = app.add_subcommand("perplexity", "Per-token perplexity of a checkpoint on a dataset split");
  c_ppl->add_option("--model", ppl.model, "Checkpoint")->required();
  c_ppl->add_option("--data", ppl.data, "Dataset directory")->required();
  c_ppl->add_option("--split", ppl.split)->capture_default_str()->check(one_of({"train", "valid", "test"}));
  c_ppl->add_option("--task", ppl.task, "Defaults to the task stored in the checkpoint")->check(one_of({"prompt2outline", "outline2article", "prompt2article"}));

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Top-k decode one output per input line");
  c_gen->add_option("--model", gen.model, "Checkpoint")->required();
  c_gen->add_option("--input", gen.input, "Source token lines")->required();
  c_gen->add_option("--out", gen.out, "Output file (default stdout)");
  c_gen->add_option("--topk", gen.decode.top_k)->capture_default_str()->check(CLI::PositiveNumber);
  c_gen->add_option("--temperature", gen.decode.temperature)->capture_default_str()->check(CLI::PositiveNumber);
  c_gen->add_option("--max-len", gen.decode.max_len)->capture_default_str()->check(CLI::PositiveNumber);
  c_gen->add_option("--seed", gen.decode.seed, "Base seed; line i uses seed + i")->capture_default_str();

  PipelineArgs pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "prompt -> outline -> article; writes gen.outline, gen.article, gen.meta");
  c_pipe->add_option("--outline-model", pipe.outline_model, "prompt2outline checkpoint")->required();
  c_pipe->add_option("--article-model", pipe.article_model, "outline2article checkpoint")->required();
  c_pipe->add_option("--prompts", pipe.prompts, "Prompt token lines")->required();
  c_pipe->add_option("--out", pipe.out, "Output directory")->capture_default_str();
  c_pipe->add_option("--topk", pipe.top_k)->capture_default_str()->check(CLI::PositiveNumber);
  c_pipe->add_option("--temperature", pipe.temperature)->capture_default_str()->check(CLI::PositiveNumber);
  c_pipe->add_option("--outline-max-len", pipe.outline_max_len)->capture_default_str()->check(CLI::PositiveNumber);
  c_pipe->add_option("--article-max-len", pipe.article_max_len)->capture_default_str()->check(CLI::PositiveNumber);
  c_pipe->add_option("--seed", pipe.seed, "Base seed; record i uses seed + i")->capture_default_str();

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer at 64-bit precision");
  c_gc->add_option("--configs", gc.configurations, "Random configurations per layer")->capture_default_str()->check(CLI::PositiveNumber);
  c_gc->add_option("--seed", gc.seed)->capture_default_str();
  c_gc->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    // Value checks that need more than a single flag, before any file access.
    if (c_dataset->parsed()) (void)parse_splits(dataset.splits);
    if (c_train->parsed()) {
      tr.optim.optimizer = parse_optimizer(tr.optimizer);
      tr.optim.jobs = jobs;
      tr.optim.validate();
      for (const auto& kv : tr.set)
        if (kv.find('=') == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  auto* sub = app.get_subcommands().front();
  out << "# hiergen " << sub->get_name() << '\n' << app.config_to_str(true, false);
  out << "jobs=" << jobs << '\n';

  try {
    if (c_prep->parsed()) {
      run_prep(prep, out);
    } else if (c_outline->parsed()) {
      run_outline(outline, jobs, out);
    } else if (c_dataset->parsed()) {
      run_dataset(dataset, out);
    } else if (c_train->parsed()) {
      const Vocabulary vocab = load_vocab(fs::path(tr.data) / "vocab.txt");
      const ModelConfig mc = train_model_config(tr, &vocab);
      mc.validate();
      out << "# model\n" << mc.to_text() << std::flush;
      if (tr.precision == "64")
        train_and_save<double>(tr, mc, vocab, out);
      else
        train_and_save<float>(tr, mc, vocab, out);
    } else if (c_ppl->parsed()) {
      with_checkpoint(ppl.model, [&](const auto& m) { perplexity_of(ppl, m, jobs, out); });
    } else if (c_gen->parsed()) {
      with_checkpoint(gen.model, [&](const auto& m) { generate_with(gen, m, jobs, out); });
    } else if (c_pipe->parsed()) {
      if (checkpoint_precision(pipe.outline_model) != checkpoint_precision(pipe.article_model)) {
        const auto om = load_checkpoint<double>(pipe.outline_model);
        const auto am = load_checkpoint<double>(pipe.article_model);
        pipeline_with(pipe, om, am, jobs, out);
      } else {
        with_checkpoint(pipe.outline_model, [&](const auto& om) {
          using Real = typename std::decay_t<decltype(om.model.parameters().begin()->second.data)>::value_type;
          const auto am = load_checkpoint<Real>(pipe.article_model);
          pipeline_with(pipe, om, am, jobs, out);
        });
      }
    } else if (c_gc->parsed()) {
      if (!run_gradcheck(gc, out)) {
        err << "error: gradient check exceeded tolerance " << gc.tolerance << '\n';
        return 2;
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace hiergen
