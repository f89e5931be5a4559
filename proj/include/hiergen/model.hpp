#pragma once

// Miniature convolutional sequence-to-sequence model.
//
// Encoder: token + position embeddings, a linear map to the hidden width,
// then residual blocks of centered convolution + GLU.
// Decoder: the same front end with causal convolutions; each block adds
// optional gated self-attention over earlier positions and gated attention
// (flat or hierarchical) over the encoder states. Residual sums are scaled
// by sqrt(1/2). A final linear layer produces target-vocabulary logits.
//
// Decoder inputs are the target shifted right behind an eos start symbol.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hiergen/attention.hpp"
#include "hiergen/graph.hpp"
#include "hiergen/vocab.hpp"

namespace hiergen {

enum class AttentionKind { kFlat, kHierarchical };

AttentionKind parse_attention_kind(const std::string& name);
std::string to_string(AttentionKind kind);

struct ModelConfig {
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t encoder_blocks = 1;
  std::size_t decoder_blocks = 1;
  std::size_t kernel_width = 3;
  AttentionKind attention = AttentionKind::kFlat;
  HierNorm hier_norm = HierNorm::kSentence;
  bool self_attention = true;
  std::size_t max_positions = 1024;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument.
  void validate() const;

  // `key=value` lines; unknown keys are rejected by from_text.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
  // Applies `key=value` lines on top of this config.
  void apply(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

struct Example {
  std::vector<TokenId> source;  // eos-terminated
  std::vector<TokenId> target;  // eos-terminated
};

// [eos] + target[0 .. n-1)
std::vector<TokenId> shift_right(std::span<const TokenId> target);

template <typename Real>
using ParamMap = std::map<std::string, Tensor<Real>>;

template <typename Real>
class IncrementalDecoder;

template <typename Real>
class Seq2SeqModel {
 public:
  // Random initialization seeded by config.seed.
  explicit Seq2SeqModel(ModelConfig config);
  // Adopts existing parameters; throws ShapeError if names or shapes differ
  // from what the config implies.
  Seq2SeqModel(ModelConfig config, ParamMap<Real> params);

  const ModelConfig& config() const { return config_; }
  const ParamMap<Real>& parameters() const { return params_; }
  ParamMap<Real>& parameters() { return params_; }
  ParamMap<Real> zero_grads() const;
  std::size_t parameter_count() const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  // Encoder states (n x hidden).
  NodeId build_encoder(Graph<Real>& g, ParamMap<Real>* grads, std::span<const TokenId> source) const;
  // Teacher-forced logits (T x target_vocab).
  NodeId build_logits(Graph<Real>& g, ParamMap<Real>* grads, std::span<const TokenId> source,
                      std::span<const TokenId> decoder_input) const;
  // Summed natural-log NLL of the example's target.
  NodeId build_nll(Graph<Real>& g, ParamMap<Real>* grads, const Example& example) const;

  Tensor<Real> logits(std::span<const TokenId> source, std::span<const TokenId> decoder_input) const;
  // ln q(target_t | target_<t, source) for every t.
  std::vector<Real> token_logprobs(std::span<const TokenId> source, std::span<const TokenId> target) const;

  IncrementalDecoder<Real> start_decoding(std::span<const TokenId> source) const;

 private:
  friend class IncrementalDecoder<Real>;

  std::map<std::string, Shape> expected_shapes() const;
  NodeId param(Graph<Real>& g, ParamMap<Real>* grads, const std::string& name) const;
  void check_ids(std::span<const TokenId> ids, std::size_t vocab, const char* what) const;
  std::vector<Span> spans_for(std::span<const TokenId> source) const;

  ModelConfig config_;
  ParamMap<Real> params_;
  std::uint64_t step_ = 0;
};

// Feeds decoder inputs one position at a time, caching per-block history so
// each step costs O(history) rather than a full recomputation. Produces the
// same logits as the teacher-forced graph.
template <typename Real>
class IncrementalDecoder {
 public:
  IncrementalDecoder(const Seq2SeqModel<Real>& model, std::span<const TokenId> source);

  // Consumes the next decoder input and returns logits for the next target.
  std::vector<Real> step(TokenId input);
  std::size_t position() const { return position_; }
  std::size_t max_positions() const { return model_->config().max_positions; }

 private:
  struct BlockState {
    std::vector<std::vector<Real>> conv_inputs;
    Tensor<Real> self_states;
    std::size_t self_count = 0;
  };

  std::vector<Real> linear(std::span<const Real> x, const std::string& prefix) const;
  GateWeights<Real> gate(const std::string& prefix) const;

  const Seq2SeqModel<Real>* model_;
  Tensor<Real> encodings_;
  std::vector<Span> spans_;
  std::vector<BlockState> blocks_;
  std::vector<GateWeights<Real>> self_gates_;
  std::vector<GateWeights<Real>> attn_gates_;
  std::size_t position_ = 0;
};

// Padded batch view of examples.
struct Batch {
  std::size_t rows = 0;
  std::size_t source_len = 0;
  std::size_t target_len = 0;
  std::vector<TokenId> source;        // rows x source_len, pad-filled
  std::vector<TokenId> target;        // rows x target_len, pad-filled
  std::vector<std::uint8_t> mask;     // rows x target_len, 1 for real targets
  std::vector<std::vector<Span>> spans;  // sentence spans of each source row

  static Batch from_examples(std::span<const Example> examples);
  std::vector<TokenId> source_row(std::size_t r) const;
  std::vector<TokenId> target_row(std::size_t r) const;
};

// rows x target_len x target_vocab; padded positions are zero.
template <typename Real>
Tensor<Real> forward(const Seq2SeqModel<Real>& model, const Batch& batch);

// Mean over unmasked positions of -ln softmax(logits)[target]. Throws
// EmptyBatch when every position is masked.
template <typename Real>
double nll_loss(const Tensor<Real>& logits, std::span<const TokenId> targets, std::span<const std::uint8_t> mask);

extern template class Seq2SeqModel<float>;
extern template class Seq2SeqModel<double>;
extern template class IncrementalDecoder<float>;
extern template class IncrementalDecoder<double>;

}  // namespace hiergen
