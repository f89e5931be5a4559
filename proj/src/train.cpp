#include "hiergen/train.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hiergen/dataset.hpp"
#include "hiergen/parallel.hpp"

namespace hiergen {

double EvalResult::bits_per_token() const {
  if (tokens == 0) throw EmptyBatch("no tokens evaluated");
  return -sum_log2 / static_cast<double>(tokens);
}

double EvalResult::perplexity() const { return std::exp2(bits_per_token()); }

EvalResult eval_from_probabilities(std::span<const double> probabilities) {
  EvalResult r;
  for (double q : probabilities) {
    r.sum_log2 += std::log2(q);
    ++r.tokens;
  }
  return r;
}

template <typename Real>
EvalResult evaluate(const Seq2SeqModel<Real>& model, std::span<const Example> data, std::size_t jobs) {
  if (data.empty()) throw EmptyBatch("empty evaluation set");
  std::vector<EvalResult> parts(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    EvalResult r;
    for (Real lp : model.token_logprobs(data[i].source, data[i].target)) {
      r.sum_log2 += static_cast<double>(lp) / std::numbers::ln2;
      ++r.tokens;
    }
    parts[i] = r;
  });
  EvalResult total;
  for (const auto& p : parts) total.merge(p);
  if (total.tokens == 0) throw EmptyBatch("evaluation set has no target tokens");
  return total;
}

template <typename Real>
double sequence_logprob(const Seq2SeqModel<Real>& model, std::span<const TokenId> source,
                        std::span<const TokenId> target) {
  double total = 0.0;
  for (Real lp : model.token_logprobs(source, target)) total += static_cast<double>(lp) / std::numbers::ln2;
  return total;
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgdMomentum;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "sgd"; }

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (clip_norm < 0.0) throw std::invalid_argument("clip norm must be >= 0");
}

std::string format_epoch(const EpochLog& e) {
  std::ostringstream out;
  out.precision(6);
  out << e.epoch << '\t' << std::fixed << e.train_loss << '\t' << e.val_ppl;
  return out.str();
}

template <typename Real>
Optimizer<Real>::Optimizer(const OptimConfig& config, const ParamMap<Real>& params) : config_(config) {
  for (const auto& [name, t] : params) {
    first_.emplace(name, Tensor<Real>(t.shape));
    if (config_.optimizer == OptimizerKind::kAdam) second_.emplace(name, Tensor<Real>(t.shape));
  }
}

template <typename Real>
void Optimizer<Real>::step(ParamMap<Real>& params, const ParamMap<Real>& grads) {
  ++t_;
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::kSgdMomentum) {
    for (auto& [name, p] : params) {
      auto& v = first_.at(name).data;
      const auto& g = grads.at(name).data;
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        v[i] = static_cast<Real>(config_.momentum) * v[i] + g[i];
        p.data[i] -= static_cast<Real>(lr) * v[i];
      }
    }
    return;
  }
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const auto b1 = static_cast<Real>(config_.beta1), b2 = static_cast<Real>(config_.beta2);
  const auto step = static_cast<Real>(lr / c1);
  const auto inv_c2 = static_cast<Real>(1.0 / c2);
  const auto eps = static_cast<Real>(config_.epsilon);
  for (auto& [name, p] : params) {
    auto& m = first_.at(name).data;
    auto& v = second_.at(name).data;
    const auto& g = grads.at(name).data;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m[i] = b1 * m[i] + (Real(1) - b1) * g[i];
      v[i] = b2 * v[i] + (Real(1) - b2) * g[i] * g[i];
      p.data[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

namespace {

std::size_t token_count(std::span<const Example> batch) {
  std::size_t n = 0;
  for (const auto& e : batch) n += e.target.size();
  return n;
}

}  // namespace

template <typename Real>
double train_step(Seq2SeqModel<Real>& model, Optimizer<Real>& optimizer, std::span<const Example> batch,
                  const OptimConfig& config) {
  const std::size_t tokens = token_count(batch);
  if (tokens == 0) throw EmptyBatch("training batch has no target tokens");

  ParamMap<Real> grads = model.zero_grads();
  std::vector<double> losses(batch.size());
  if (config.jobs <= 1 || batch.size() <= 1) {
    // Accumulating straight into one map adds per-example gradients in
    // example order, matching the reduction below bit for bit.
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Graph<Real> g;
      const NodeId nll = model.build_nll(g, &grads, batch[i]);
      losses[i] = static_cast<double>(g.value(nll).data[0]);
      g.backward(nll);
    }
  } else {
    std::vector<ParamMap<Real>> per(batch.size());
    parallel_for(batch.size(), config.jobs, [&](std::size_t i) {
      per[i] = model.zero_grads();
      Graph<Real> g;
      const NodeId nll = model.build_nll(g, &per[i], batch[i]);
      losses[i] = static_cast<double>(g.value(nll).data[0]);
      g.backward(nll);
    });
    for (const auto& p : per)
      for (auto& [name, t] : grads) {
        const auto& src = p.at(name).data;
        for (std::size_t k = 0; k < t.data.size(); ++k) t.data[k] += src[k];
      }
  }

  double loss = 0.0;
  for (double l : losses) loss += l;
  loss /= static_cast<double>(tokens);
  if (!std::isfinite(loss)) throw DivergedError("non-finite training loss at step " + std::to_string(model.step()));

  const auto inv = static_cast<Real>(1.0 / static_cast<double>(tokens));
  double norm_sq = 0.0;
  for (auto& [name, t] : grads)
    for (auto& v : t.data) {
      v *= inv;
      norm_sq += static_cast<double>(v) * static_cast<double>(v);
    }
  if (!std::isfinite(norm_sq)) throw DivergedError("non-finite gradient at step " + std::to_string(model.step()));
  const double norm = std::sqrt(norm_sq);
  if (config.clip_norm > 0.0 && norm > config.clip_norm) {
    const auto s = static_cast<Real>(config.clip_norm / norm);
    for (auto& [name, t] : grads)
      for (auto& v : t.data) v *= s;
  }
  optimizer.step(model.parameters(), grads);
  model.set_step(model.step() + 1);
  return loss;
}

template <typename Real>
TrainLog train(Seq2SeqModel<Real>& model, std::span<const Example> train_data, std::span<const Example> valid_data,
               const OptimConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (train_data.empty()) throw EmptyBatch("empty training set");
  Optimizer<Real> optimizer(config, model.parameters());
  TrainLog log;
  ParamMap<Real> best = model.parameters();
  std::uint64_t best_step = model.step();
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = seeded_permutation(train_data.size(), config.seed * 1000003ULL + epoch);
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    std::vector<Example> batch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(train_data[order[i]]);
      const std::size_t tokens = token_count(batch);
      loss_sum += train_step(model, optimizer, batch, config) * static_cast<double>(tokens);
      token_sum += tokens;
    }
    EpochLog e;
    e.epoch = epoch;
    e.train_loss = loss_sum / static_cast<double>(token_sum);
    e.val_ppl = valid_data.empty() ? std::nan("") : evaluate(model, valid_data, config.jobs).perplexity();
    if (!std::isfinite(e.train_loss)) throw DivergedError("non-finite epoch loss");
    log.epochs.push_back(e);
    const bool better = valid_data.empty() || !have_best || e.val_ppl < log.best_val_ppl;
    if (better) {
      have_best = true;
      log.best_epoch = epoch;
      log.best_val_ppl = e.val_ppl;
      best = model.parameters();
      best_step = model.step();
    }
    if (on_epoch) on_epoch(e);
  }
  if (have_best) {
    model.parameters() = std::move(best);
    model.set_step(best_step);
  }
  return log;
}

#define HIERGEN_INSTANTIATE(Real)                                                                                  \
  template EvalResult evaluate<Real>(const Seq2SeqModel<Real>&, std::span<const Example>, std::size_t);           \
  template double sequence_logprob<Real>(const Seq2SeqModel<Real>&, std::span<const TokenId>,                     \
                                         std::span<const TokenId>);                                                \
  template class Optimizer<Real>;                                                                                  \
  template double train_step<Real>(Seq2SeqModel<Real>&, Optimizer<Real>&, std::span<const Example>,               \
                                   const OptimConfig&);                                                            \
  template TrainLog train<Real>(Seq2SeqModel<Real>&, std::span<const Example>, std::span<const Example>,          \
                                const OptimConfig&, const std::function<void(const EpochLog&)>&);

HIERGEN_INSTANTIATE(float)
HIERGEN_INSTANTIATE(double)

#undef HIERGEN_INSTANTIATE

}  // namespace hiergen
