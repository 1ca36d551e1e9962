#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sktag/augment.hpp"
#include "sktag/corpus.hpp"
#include "sktag/metrics.hpp"
#include "sktag/model.hpp"
#include "sktag/model_io.hpp"
#include "sktag/tokenizer.hpp"
#include "sktag/train.hpp"

namespace sktag {

/// Everything needed to go from a tagged corpus to a model file.
struct PipelineConfig {
  ModelConfig model;  // vocab_size and n_tags are filled in by the pipeline
  TrainConfig train;
  MlmConfig mlm;
  WindowSpec windows{1, std::nullopt, true};
  bool augment_train = true;
  std::size_t vocab_size = 2000;
  std::size_t min_frequency = 2;
};

Tokenizer tokenizer_for(const Corpus& corpus, const PipelineConfig& cfg);

struct FineTuneResult {
  ModelBundle bundle;
  TrainHistory history;
  EvalReport val_report;
  std::size_t train_examples = 0;
};

/// Trains a tagger on `train` (window-augmented when enabled), validating on
/// `val` each epoch. Starts from `start` when given (its tokenizer is reused
/// and its head is replaced if the tag count differs), else from a fresh
/// tokenizer and random init.
FineTuneResult fine_tune(const Corpus& train, const Corpus& val, const TagSet& tagset,
                         const PipelineConfig& cfg, const ModelBundle* start = nullptr,
                         const std::function<void(const EpochRecord&)>& on_epoch = {});

struct PretrainOutcome {
  ModelBundle bundle;
  std::vector<double> epoch_losses;
};

/// Pretrains encoder + MLM head on the corpus text (tags only size the
/// classification head). Trains a tokenizer on the corpus unless one is given.
PretrainOutcome pretrain(const Corpus& corpus, const TagSet& tagset, const PipelineConfig& cfg,
                         const Tokenizer* tokenizer = nullptr,
                         const std::function<void(std::size_t, double)>& on_epoch = {});

struct TransferComparison {
  FineTuneResult scratch;
  FineTuneResult transfer;
  std::vector<double> pretrain_losses;

  std::string to_table() const;
};

/// Fine-tunes once from random init and once from an MLM-pretrained encoder,
/// under identical training settings.
TransferComparison compare_transfer(const Corpus& train, const Corpus& val, const TagSet& tagset,
                                    const PipelineConfig& cfg, std::size_t pretrain_epochs);

}  // namespace sktag
