#include "sktag/pipeline.hpp"

#include <cstdio>

#include "sktag/error.hpp"

namespace sktag {

Tokenizer tokenizer_for(const Corpus& corpus, const PipelineConfig& cfg) {
  const auto texts = corpus_texts(corpus);
  return train_bpe(texts, cfg.vocab_size, cfg.min_frequency);
}

FineTuneResult fine_tune(const Corpus& train, const Corpus& val, const TagSet& tagset,
                         const PipelineConfig& cfg, const ModelBundle* start,
                         const std::function<void(const EpochRecord&)>& on_epoch) {
  FineTuneResult out;
  ModelParams init;
  if (start) {
    out.bundle.tokenizer = start->tokenizer;
    init = start->params;
    if (init.config.n_tags != tagset.size() || !(start->tagset == tagset)) {
      reset_classifier(init, tagset.size(), cfg.model.seed);
    }
  } else {
    out.bundle.tokenizer = tokenizer_for(train, cfg);
    auto model_cfg = cfg.model;
    model_cfg.vocab_size = out.bundle.tokenizer.vocab_size();
    model_cfg.n_tags = tagset.size();
    init = init_model(model_cfg);
  }
  out.bundle.tagset = tagset;

  const Corpus examples = cfg.augment_train ? augment_corpus(train, cfg.windows) : train;
  if (examples.sentences.empty()) throw DataError("augmentation produced no training examples");
  out.train_examples = examples.size();

  auto result = train_token_classifier(std::move(init), examples, val, out.bundle.tokenizer, tagset,
                                       cfg.train, on_epoch);
  out.bundle.params = std::move(result.params);
  out.history = std::move(result.history);
  out.val_report = evaluate(out.bundle.params, out.bundle.tokenizer, tagset, val,
                            std::min(cfg.train.max_len, out.bundle.params.config.max_len),
                            cfg.train.length_mode);
  return out;
}

PretrainOutcome pretrain(const Corpus& corpus, const TagSet& tagset, const PipelineConfig& cfg,
                         const Tokenizer* tokenizer,
                         const std::function<void(std::size_t, double)>& on_epoch) {
  PretrainOutcome out;
  out.bundle.tokenizer = tokenizer ? *tokenizer : tokenizer_for(corpus, cfg);
  out.bundle.tagset = tagset;
  auto model_cfg = cfg.model;
  model_cfg.vocab_size = out.bundle.tokenizer.vocab_size();
  model_cfg.n_tags = tagset.size();
  std::vector<std::vector<std::string>> texts;
  texts.reserve(corpus.size());
  for (const auto& s : corpus.sentences) texts.push_back(s.words);
  auto result = pretrain_mlm(model_cfg, out.bundle.tokenizer, texts, cfg.mlm, cfg.train, on_epoch);
  out.bundle.params = std::move(result.params);
  out.epoch_losses = std::move(result.epoch_losses);
  return out;
}

TransferComparison compare_transfer(const Corpus& train, const Corpus& val, const TagSet& tagset,
                                    const PipelineConfig& cfg, std::size_t pretrain_epochs) {
  TransferComparison out;
  out.scratch = fine_tune(train, val, tagset, cfg);

  auto pre_cfg = cfg;
  pre_cfg.train.epochs = pretrain_epochs;
  auto pre = pretrain(train, tagset, pre_cfg);
  out.pretrain_losses = std::move(pre.epoch_losses);
  out.transfer = fine_tune(train, val, tagset, cfg, &pre.bundle);
  return out;
}

std::string TransferComparison::to_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %11s %9s %10s %10s\n", "run", "weighted_f1", "accuracy",
                "best_epoch", "final_loss");
  out += line;
  auto row = [&](const char* name, const FineTuneResult& r) {
    const double loss = r.history.epochs.empty() ? 0.0 : r.history.epochs.back().train_loss;
    std::snprintf(line, sizeof line, "%-22s %11.4f %9.4f %10zu %10.4f\n", name,
                  r.val_report.weighted_f1, r.val_report.accuracy, r.history.best_epoch, loss);
    out += line;
  };
  row("scratch", scratch);
  row("mlm-pretrain+finetune", transfer);
  if (!pretrain_losses.empty()) {
    std::snprintf(line, sizeof line, "pretraining MLM loss: %.4f -> %.4f over %zu epochs\n",
                  pretrain_losses.front(), pretrain_losses.back(), pretrain_losses.size());
    out += line;
  }
  return out;
}

}  // namespace sktag
