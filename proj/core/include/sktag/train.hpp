#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sktag/corpus.hpp"
#include "sktag/metrics.hpp"
#include "sktag/model.hpp"
#include "sktag/random.hpp"
#include "sktag/tokenizer.hpp"

namespace sktag {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double grad_clip_norm = 1.0;  // 0 disables clipping
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t max_len = 128;
  LengthMode length_mode = LengthMode::truncate;

  void validate() const;  // throws DataError
};

struct MlmConfig {
  double mask_probability = 0.15;
  double replace_mask_fraction = 0.8;
  double replace_random_fraction = 0.1;
  double keep_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // throws DataError
};

template <class T>
struct OptimizerState {
  BasicParams<T> first_moment;
  BasicParams<T> second_moment;
  std::uint64_t step = 0;

  static OptimizerState zeros_for(const BasicParams<T>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_weighted_f1 = 0.0;
  double val_accuracy = 0.0;
  double wall_time_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran

  /// One JSON object per line.
  std::string to_jsonl() const;
};

template <class T>
struct CrossEntropy {
  T loss{};
  std::vector<T> grad;  // d loss / d logits, same layout as the logits
  std::size_t supervised = 0;
};

/// Mean of -log softmax(row)[label] over rows whose label is not
/// kIgnoreLabel. Throws DataError when every label is ignored.
template <class T>
CrossEntropy<T> cross_entropy(std::span<const T> logits, std::size_t n_classes,
                              std::span<const std::int32_t> labels);

template <class T>
struct GradientResult {
  T loss{};
  BasicParams<T> grads;
};

/// Exact reverse-mode gradients of cross_entropy(forward(params, batch)).
template <class T>
GradientResult<T> compute_gradients(const BasicParams<T>& params, const Batch& batch,
                                    std::span<const std::int32_t> labels, Head head = Head::tags,
                                    Mode mode = Mode::eval, std::uint64_t dropout_seed = 0);

/// Euclidean norm over every gradient element.
template <class T>
double global_norm(const BasicParams<T>& grads);

/// Clips to cfg.grad_clip_norm, then applies one bias-corrected Adam update.
/// Throws ModelError naming the first tensor holding a non-finite gradient.
template <class T>
void adam_step(BasicParams<T>& params, const BasicParams<T>& grads, OptimizerState<T>& state,
               const TrainConfig& cfg);

struct MaskedEncoding {
  Encoding encoding;
  std::vector<std::int32_t> targets;  // original id at selected positions, else kIgnoreLabel
};

/// Selects non-special, non-PAD positions with cfg.mask_probability and
/// applies the MASK / random / keep replacement split.
MaskedEncoding mask_tokens(const Encoding& enc, const MlmConfig& cfg, const Tokenizer& tok);
MaskedEncoding mask_tokens(const Encoding& enc, const MlmConfig& cfg, const Tokenizer& tok,
                           Rng& rng);

struct PretrainResult {
  ModelParams params;  // includes the MLM head
  std::vector<double> epoch_losses;
};

/// Masked-token pretraining of the encoder plus MLM head.
PretrainResult pretrain_mlm(const ModelConfig& config, const Tokenizer& tok,
                            std::span<const std::vector<std::string>> texts,
                            const MlmConfig& mlm_cfg, const TrainConfig& train_cfg,
                            const std::function<void(std::size_t, double)>& on_epoch = {});

struct TrainResult {
  ModelParams params;  // from the epoch with the best validation weighted F1
  TrainHistory history;
};

/// Supervised fine-tuning with per-epoch validation.
TrainResult train_token_classifier(ModelParams init, const Corpus& train, const Corpus& val,
                                   const Tokenizer& tok, const TagSet& tagset,
                                   const TrainConfig& cfg,
                                   const std::function<void(const EpochRecord&)>& on_epoch = {});

/// predict_tags over every sentence, scored against the gold tags.
EvalReport evaluate(const ModelParams& params, const Tokenizer& tok, const TagSet& tagset,
                    const Corpus& gold, std::size_t max_len,
                    LengthMode mode = LengthMode::truncate);

}  // namespace sktag
