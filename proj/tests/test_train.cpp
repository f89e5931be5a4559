#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "hiergen/errors.hpp"
#include "hiergen/train.hpp"

using namespace hiergen;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.source_vocab = 10;
  c.target_vocab = 10;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.encoder_blocks = 1;
  c.decoder_blocks = 1;
  c.kernel_width = 3;
  c.max_positions = 32;
  c.seed = 3;
  return c;
}

// Copy task: the target repeats the source.
std::vector<Example> copy_data(std::size_t n) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<TokenId> s;
    for (std::size_t k = 0; k < 3 + i % 3; ++k) s.push_back(static_cast<TokenId>(5 + (i * 7 + k * 3) % 5));
    s.push_back(kEosId);
    out.push_back({s, s});
  }
  return out;
}

}  // namespace

TEST_CASE("perplexity hand cases") {
  const std::vector<double> perfect(17, 1.0);
  CHECK(eval_from_probabilities(perfect).perplexity() == 1.0);

  const std::vector<double> uniform(1000, 1.0 / 50);
  CHECK(std::abs(eval_from_probabilities(uniform).perplexity() - 50.0) < 1e-9);

  const std::vector<double> mixed = {0.5, 0.125};
  CHECK(std::abs(eval_from_probabilities(mixed).perplexity() - 4.0) < 1e-12);
  CHECK(eval_from_probabilities(mixed).bits_per_token() == 2.0);

  EvalResult a = eval_from_probabilities(std::vector<double>{0.5});
  a.merge(eval_from_probabilities(std::vector<double>{0.125}));
  CHECK(a.perplexity() == eval_from_probabilities(mixed).perplexity());

  CHECK_THROWS_AS(EvalResult{}.perplexity(), EmptyBatch);
}

TEST_CASE("model perplexity matches token log-probabilities") {
  Seq2SeqModel<double> m(small_config());
  const auto data = copy_data(6);
  double sum = 0;
  std::size_t n = 0;
  for (const auto& e : data)
    for (double lp : m.token_logprobs(e.source, e.target)) {
      sum += lp;
      ++n;
    }
  const auto r = evaluate(m, data);
  CHECK(r.tokens == n);
  CHECK(r.perplexity() == doctest::Approx(std::exp(-sum / static_cast<double>(n))).epsilon(1e-12));
  // An untrained model is close to uniform over the target vocabulary.
  CHECK(r.perplexity() > 5.0);
  CHECK(r.perplexity() < 20.0);
  CHECK(evaluate(m, data, 4).sum_log2 == r.sum_log2);

  double seq = 0;
  for (double lp : m.token_logprobs(data[0].source, data[0].target)) seq += lp / std::log(2.0);
  CHECK(sequence_logprob(m, data[0].source, data[0].target) == doctest::Approx(seq).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate(m, std::span<const Example>{}), EmptyBatch);
}

TEST_CASE("optimizer update rules") {
  ParamMap<double> p;
  p.emplace("w", Tensor<double>({2}, {1.0, -1.0}));
  ParamMap<double> g;
  g.emplace("w", Tensor<double>({2}, {0.5, -2.0}));

  OptimConfig sgd;
  sgd.optimizer = OptimizerKind::kSgdMomentum;
  sgd.learning_rate = 0.1;
  sgd.momentum = 0.5;
  Optimizer<double> s(sgd, p);
  s.step(p, g);
  CHECK(p.at("w").data[0] == doctest::Approx(1.0 - 0.05));
  s.step(p, g);  // velocity 0.5 * 0.5 + 0.5 = 0.75
  CHECK(p.at("w").data[0] == doctest::Approx(0.95 - 0.075));

  // The first Adam step moves each parameter by lr in the gradient's sign.
  ParamMap<double> q;
  q.emplace("w", Tensor<double>({2}, {1.0, -1.0}));
  OptimConfig adam;
  adam.learning_rate = 0.01;
  Optimizer<double> a(adam, q);
  a.step(q, g);
  CHECK(q.at("w").data[0] == doctest::Approx(0.99).epsilon(1e-7));
  CHECK(q.at("w").data[1] == doctest::Approx(-0.99).epsilon(1e-7));
}

TEST_CASE("optimizer config validation") {
  OptimConfig c;
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = OptimConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = OptimConfig{};
  c.clip_norm = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(parse_optimizer("adam") == OptimizerKind::kAdam);
  CHECK(parse_optimizer("sgd") == OptimizerKind::kSgdMomentum);
  CHECK_THROWS_AS(parse_optimizer("lbfgs"), std::invalid_argument);
}

TEST_CASE("training reduces loss and keeps the best validation model") {
  Seq2SeqModel<double> m(small_config());
  const auto data = copy_data(24);
  OptimConfig c;
  c.learning_rate = 0.01;
  c.batch_size = 4;
  c.epochs = 8;
  const double before = evaluate(m, data).perplexity();
  std::size_t callbacks = 0;
  const auto log = train<double>(m, data, data, c, [&](const EpochLog&) { ++callbacks; });
  CHECK(callbacks == 8);
  REQUIRE(log.epochs.size() == 8);
  CHECK(log.epochs.back().train_loss < log.epochs.front().train_loss);
  double best = log.epochs[0].val_ppl;
  for (const auto& e : log.epochs) best = std::min(best, e.val_ppl);
  CHECK(log.best_val_ppl == best);
  CHECK(evaluate(m, data).perplexity() == doctest::Approx(log.best_val_ppl).epsilon(1e-12));
  CHECK(log.best_val_ppl < before / 2);
  CHECK(m.step() == log.best_epoch * 6);
}

TEST_CASE("training does not depend on the number of jobs") {
  const auto data = copy_data(12);
  OptimConfig c;
  c.learning_rate = 0.01;
  c.batch_size = 5;
  c.epochs = 2;
  Seq2SeqModel<double> one(small_config()), four(small_config());
  c.jobs = 1;
  train<double>(one, data, data, c);
  c.jobs = 4;
  train<double>(four, data, data, c);
  CHECK(one.parameters() == four.parameters());
}

TEST_CASE("gradient clipping bounds the update") {
  const auto data = copy_data(4);
  OptimConfig c;
  c.optimizer = OptimizerKind::kSgdMomentum;
  c.momentum = 0.0;
  c.learning_rate = 1.0;
  c.clip_norm = 1e-3;
  Seq2SeqModel<double> m(small_config());
  const auto before = m.parameters();
  Optimizer<double> opt(c, m.parameters());
  train_step(m, opt, data, c);
  double moved = 0;
  for (const auto& [name, t] : m.parameters())
    for (std::size_t i = 0; i < t.size(); ++i) moved += std::pow(t.data[i] - before.at(name).data[i], 2);
  CHECK(std::sqrt(moved) == doctest::Approx(1e-3).epsilon(1e-9));
}

TEST_CASE("training errors") {
  Seq2SeqModel<double> m(small_config());
  OptimConfig c;
  CHECK_THROWS_AS(train<double>(m, std::span<const Example>{}, std::span<const Example>{}, c), EmptyBatch);

  Optimizer<double> opt(c, m.parameters());
  const std::vector<Example> empty_targets = {{{5, kEosId}, {}}};
  CHECK_THROWS_AS(train_step(m, opt, empty_targets, c), EmptyBatch);

  m.parameters().at("dec.out.b").data[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train_step(m, opt, copy_data(2), c), DivergedError);
}

TEST_CASE("epoch log format") {
  EpochLog e{3, 1.5, 4.25};
  CHECK(format_epoch(e) == "3\t1.500000\t4.250000");
}
