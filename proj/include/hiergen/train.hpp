#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hiergen/model.hpp"

namespace hiergen {

// Token count and summed log2 probability. Merging is associative, so
// per-batch results can be combined in any grouping.
struct EvalResult {
  std::uint64_t tokens = 0;
  double sum_log2 = 0.0;

  // 2^(-(1/N) * sum log2 q(x_i)). Throws EmptyBatch when N == 0.
  double perplexity() const;
  double bits_per_token() const;
  void merge(const EvalResult& other) {
    tokens += other.tokens;
    sum_log2 += other.sum_log2;
  }
};

// Perplexity from a list of per-token probabilities.
EvalResult eval_from_probabilities(std::span<const double> probabilities);

template <typename Real>
EvalResult evaluate(const Seq2SeqModel<Real>& model, std::span<const Example> data, std::size_t jobs = 1);

template <typename Real>
EvalResult perplexity(const Seq2SeqModel<Real>& model, std::span<const Example> data, std::size_t jobs = 1) {
  return evaluate(model, data, jobs);
}

// sum_t log2 q(target_t | target_<t, source).
template <typename Real>
double sequence_logprob(const Seq2SeqModel<Real>& model, std::span<const TokenId> source,
                        std::span<const TokenId> target);

enum class OptimizerKind { kAdam, kSgdMomentum };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 1.0;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean natural-log NLL per target token
  double val_ppl = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_ppl = 0.0;
};

// `epoch loss val_ppl`, tab separated.
std::string format_epoch(const EpochLog& e);

template <typename Real>
class Optimizer {
 public:
  Optimizer(const OptimConfig& config, const ParamMap<Real>& params);
  void step(ParamMap<Real>& params, const ParamMap<Real>& grads);

 private:
  OptimConfig config_;
  ParamMap<Real> first_;
  ParamMap<Real> second_;
  std::uint64_t t_ = 0;
};

// Minibatch training on summed token NLL divided by the batch's token count.
// Per-example gradients are reduced in example order, so results do not
// depend on `jobs`. After every epoch the validation perplexity is measured;
// the model ends holding the best-validation parameters. Throws
// DivergedError on a non-finite loss.
template <typename Real>
TrainLog train(Seq2SeqModel<Real>& model, std::span<const Example> train_data, std::span<const Example> valid_data,
               const OptimConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

// One optimizer step on one batch; returns the batch's mean token loss.
template <typename Real>
double train_step(Seq2SeqModel<Real>& model, Optimizer<Real>& optimizer, std::span<const Example> batch,
                  const OptimConfig& config);

}  // namespace hiergen
