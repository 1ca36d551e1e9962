#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sktag/corpus.hpp"
#include "sktag/tensor.hpp"
#include "sktag/tokenizer.hpp"

namespace sktag {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t max_len = 128;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 256;
  std::size_t n_tags = 0;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // throws ModelError
  std::size_t head_dim() const { return d_model / n_heads; }
  bool operator==(const ModelConfig&) const = default;
};

template <class T>
struct EncoderLayer {
  Tensor<T> query_weight, query_bias;
  Tensor<T> key_weight, key_bias;
  Tensor<T> value_weight, value_bias;
  Tensor<T> output_weight, output_bias;
  Tensor<T> attention_norm_gain, attention_norm_bias;
  Tensor<T> ff_in_weight, ff_in_bias;
  Tensor<T> ff_out_weight, ff_out_bias;
  Tensor<T> ff_norm_gain, ff_norm_bias;

  bool operator==(const EncoderLayer&) const = default;
};

template <class T>
struct BasicParams {
  ModelConfig config;
  Tensor<T> token_embeddings;     // [vocab_size x d_model]
  Tensor<T> position_embeddings;  // [max_len x d_model]
  Tensor<T> embedding_norm_gain, embedding_norm_bias;
  std::vector<EncoderLayer<T>> layers;
  Tensor<T> classifier_weight;  // [d_model x n_tags]
  Tensor<T> classifier_bias;    // [n_tags]
  // Empty unless the model was built for masked-token pretraining.
  Tensor<T> mlm_weight;  // [d_model x vocab_size]
  Tensor<T> mlm_bias;    // [vocab_size]

  bool has_mlm_head() const { return !mlm_weight.empty(); }

  /// All tensors in a fixed canonical order; the MLM head is listed only when
  /// present.
  std::vector<std::pair<std::string, Tensor<T>*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors() const;

  /// Same shapes, all zeros.
  BasicParams zeros_like() const;

  template <class U>
  BasicParams<U> cast() const;

  bool operator==(const BasicParams&) const = default;
};

using ModelParams = BasicParams<float>;

/// Seeded truncated-normal (std 0.02) weights; zero biases; unit norm gains.
ModelParams init_model(const ModelConfig& config, bool with_mlm_head = false);

/// Replaces the classification head with a freshly initialized one for n_tags.
void reset_classifier(ModelParams& params, std::size_t n_tags, std::uint64_t seed);

/// Adds (or re-initializes) the masked-token prediction head.
void reset_mlm_head(ModelParams& params, std::uint64_t seed);

enum class Mode { train, eval };
enum class Head { tags, mlm };

/// Token ids and padding mask for B sequences of equal length L.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<TokenId> ids;            // [B*L]
  std::vector<std::uint8_t> mask;      // [B*L]
  std::vector<std::int32_t> labels;    // [B*L] or empty
};

/// Stacks encodings of equal length. With `trim`, drops trailing columns that
/// are padding in every sequence.
Batch make_batch(std::span<const Encoding> encodings, bool trim = false);

template <class T>
struct Logits {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::size_t n_classes = 0;
  std::vector<T> values;  // [B x L x C]

  std::span<const T> row(std::size_t b, std::size_t t) const {
    return {values.data() + (b * seq_len + t) * n_classes, n_classes};
  }
};

/// Embeddings, post-norm encoder layers, then the chosen head. Dropout runs
/// only in Mode::train and draws from `dropout_seed`.
template <class T>
Logits<T> forward(const BasicParams<T>& params, const Batch& batch, Mode mode = Mode::eval,
                  Head head = Head::tags, std::uint64_t dropout_seed = 0);

template <class T>
void softmax(std::span<const T> logits, std::span<T> probs);

template <class T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.size());
  softmax<T>(logits, out);
  return out;
}

/// Index of the largest element; ties go to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

/// Encodes, runs an eval-mode forward pass, and decodes the argmax tag at
/// each surviving word's first subword.
TaggedSentence predict_tags(const ModelParams& params, const Tokenizer& tok, const TagSet& tagset,
                            std::span<const std::string> words, std::size_t max_len,
                            LengthMode mode = LengthMode::truncate);

}  // namespace sktag
