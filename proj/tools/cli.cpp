#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sktag/augment.hpp"
#include "sktag/error.hpp"
#include "sktag/model_io.hpp"
#include "sktag/pipeline.hpp"
#include "sktag/skeleton.hpp"

namespace sktag::cli {

namespace {

// Union of every subcommand's settings. Defaults mirror the library structs.
struct RunConfig {
  std::string corpus;
  std::string val_corpus;
  std::string tokenizer;
  std::string model;
  std::string out;
  std::string report;
  std::string history;
  std::string input = "-";
  std::string config;

  double val_ratio = 0.2;
  std::uint64_t seed = 0;
  std::size_t max_len = 128;
  bool strict_len = false;
  std::size_t window_max = 0;  // 0: sentence length
  bool augment_dedup = false;
  bool train_dedup = true;  // training data is deduplicated unless asked otherwise
  std::vector<std::string> keep_lexical;
  std::string separator = " ";

  PipelineConfig pipe;
};

std::string read_text(const std::string& path, std::istream& in) {
  if (path == "-") {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open input file '" + path + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write output file '" + path + "'");
  file << text;
}

CLI::Option* add_bool(CLI::App* sub, const std::string& name, bool& value,
                      const std::string& description) {
  return sub->add_flag(name, value, description)->default_str(value ? "true" : "false");
}

void add_seed(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--seed", rc.seed, "Seed for shuffling, splitting, init, dropout and masking");
}

void add_length(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--max-len", rc.max_len, "Maximum encoded length including [CLS] and [SEP]")
      ->check(CLI::Range(3, 1 << 20));
  add_bool(sub, "--strict-len", rc.strict_len,
                "Fail on over-long sentences instead of truncating whole words");
}

void add_windows(CLI::App* sub, RunConfig& rc, bool& dedup) {
  sub->add_option("--window-min", rc.pipe.windows.min_size, "Smallest window size")
      ->check(CLI::PositiveNumber);
  sub->add_option("--window-max", rc.window_max, "Largest window size (0: sentence length)");
  add_bool(sub, "--dedup", dedup, "Keep identical fragments once");
}

void add_tokenizer_training(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--vocab-size", rc.pipe.vocab_size, "BPE vocabulary size");
  sub->add_option("--min-frequency", rc.pipe.min_frequency, "Minimum pair frequency for a merge");
}

void add_model_shape(CLI::App* sub, RunConfig& rc) {
  auto& m = rc.pipe.model;
  sub->add_option("--d-model", m.d_model, "Hidden size");
  sub->add_option("--n-heads", m.n_heads, "Attention heads");
  sub->add_option("--n-layers", m.n_layers, "Encoder layers");
  sub->add_option("--d-ff", m.d_ff, "Feed-forward inner size");
  sub->add_option("--dropout", m.dropout_rate, "Dropout rate");
}

void add_optimizer(CLI::App* sub, RunConfig& rc) {
  auto& t = rc.pipe.train;
  sub->add_option("--epochs", t.epochs, "Training epochs")->check(CLI::PositiveNumber);
  sub->add_option("--batch-size", t.batch_size, "Examples per batch")->check(CLI::PositiveNumber);
  sub->add_option("--lr", t.learning_rate, "Adam learning rate");
  sub->add_option("--beta1", t.adam_beta1, "Adam first-moment decay");
  sub->add_option("--beta2", t.adam_beta2, "Adam second-moment decay");
  sub->add_option("--adam-eps", t.adam_epsilon, "Adam epsilon");
  sub->add_option("--grad-clip", t.grad_clip_norm, "Global gradient norm clip (0: off)");
  add_bool(sub, "--shuffle", t.shuffle, "Shuffle examples every epoch");
}

void add_config(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--config", rc.config,
                  "JSON file of flag defaults, keyed by long flag name without dashes");
}

// Finalizes cross-module fields once flags are parsed.
void settle(RunConfig& rc, bool training) {
  rc.pipe.windows.dedup = training ? rc.train_dedup : rc.augment_dedup;
  rc.pipe.model.seed = rc.seed;
  rc.pipe.train.seed = rc.seed;
  rc.pipe.mlm.seed = rc.seed;
  rc.pipe.model.max_len = rc.max_len;
  rc.pipe.train.max_len = rc.max_len;
  rc.pipe.train.length_mode = rc.strict_len ? LengthMode::strict : LengthMode::truncate;
  rc.pipe.windows.max_size =
      rc.window_max == 0 ? std::nullopt : std::optional<std::size_t>(rc.window_max);
  rc.pipe.windows.validate();
}

// Turns `--config file.json` into `--key=value` arguments placed before the
// user's own flags, so explicit flags win. Keys the chosen subcommand does not
// define are skipped, so one file can serve every subcommand.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;

  std::ifstream file(path);
  if (!file) throw DataError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    file >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw DataError("config file '" + path + "' must hold a JSON object");

  const auto* sub = app.get_subcommand_no_throw(args.front());
  if (sub == nullptr) return args;
  std::vector<std::string> expanded{args.front()};
  for (const auto& [key, value] : j.items()) {
    if (key == "config" || sub->get_option_no_throw("--" + key) == nullptr) continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& item : value) {
        if (!text.empty()) text += ',';
        text += item.is_string() ? item.get<std::string>() : item.dump();
      }
    } else {
      text = value.dump();
    }
    expanded.push_back("--" + key + "=" + text);
  }
  expanded.insert(expanded.end(), args.begin() + 1, args.end());
  return expanded;
}

int cmd_tokenizer_train(const RunConfig& rc, std::ostream& out) {
  const auto corpus = read_conll_file(rc.corpus);
  const auto tok = tokenizer_for(corpus, rc.pipe);
  tok.save(rc.out);
  out << "tokenizer: " << tok.vocab_size() << " tokens, " << tok.merges().size() << " merges, "
      << tok.alphabet().size() << " base symbols -> " << rc.out << "\n";
  return kOk;
}

int cmd_augment(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto corpus = read_conll_file(rc.corpus);
  const auto augmented = augment_corpus(corpus, rc.pipe.windows);
  write_text(rc.out, augmented.sentences.empty() ? std::string{} : write_conll(augmented), out);
  (rc.out == "-" ? err : out) << "augment: " << corpus.size() << " sentences -> "
                                    << augmented.size() << " fragments\n";
  return kOk;
}

int cmd_pretrain(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto corpus = read_conll_file(rc.corpus);
  const auto tagset = tagset_of(corpus);
  std::optional<Tokenizer> tok;
  if (!rc.tokenizer.empty()) tok = Tokenizer::load(rc.tokenizer);
  const auto result =
      pretrain(corpus, tagset, rc.pipe, tok ? &*tok : nullptr, [&](std::size_t epoch, double loss) {
        err << "pretrain epoch " << epoch << " mlm_loss " << loss << "\n";
      });
  save_model(result.bundle, rc.out);
  out << "pretrain: " << corpus.size() << " sentences, " << result.epoch_losses.size()
      << " epochs, final mlm_loss " << result.epoch_losses.back() << " -> " << rc.out << "\n";
  return kOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto corpus = read_conll_file(rc.corpus);
  Corpus train;
  Corpus val;
  TagSet tagset;
  if (!rc.val_corpus.empty()) {
    train = corpus;
    val = read_conll_file(rc.val_corpus);
    tagset = tagset_of(train);
  } else {
    auto parts = split(corpus, rc.val_ratio, rc.seed);
    train = std::move(parts.train);
    val = std::move(parts.val);
    tagset = tagset_of(corpus);
  }

  std::optional<ModelBundle> start;
  if (!rc.model.empty()) {
    start = load_model(rc.model);
  } else if (!rc.tokenizer.empty()) {
    ModelBundle b;
    b.tokenizer = Tokenizer::load(rc.tokenizer);
    auto cfg = rc.pipe.model;
    cfg.vocab_size = b.tokenizer.vocab_size();
    cfg.n_tags = tagset.size();
    b.params = init_model(cfg);
    b.tagset = tagset;
    start = std::move(b);
  }

  const auto result = fine_tune(train, val, tagset, rc.pipe, start ? &*start : nullptr,
                                [&](const EpochRecord& e) {
                                  err << "epoch " << e.epoch << " loss " << e.train_loss
                                      << " val_f1 " << e.val_weighted_f1 << " val_acc "
                                      << e.val_accuracy << "\n";
                                });
  save_model(result.bundle, rc.out);
  const auto history_path = rc.history.empty() ? rc.out + ".history.jsonl" : rc.history;
  write_text(history_path, result.history.to_jsonl(), out);
  if (!rc.report.empty()) write_text(rc.report, result.val_report.to_json(), out);
  out << "train: " << result.train_examples << " examples, best epoch " << result.history.best_epoch
      << ", val weighted_f1 " << result.val_report.weighted_f1 << ", accuracy "
      << result.val_report.accuracy << " -> " << rc.out << "\n";
  return kOk;
}

std::size_t effective_max_len(const RunConfig& rc, const ModelBundle& bundle) {
  return std::min(rc.max_len, bundle.params.config.max_len);
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const auto bundle = load_model(rc.model);
  const auto corpus = read_conll_file(rc.corpus);
  const auto report = evaluate(bundle.params, bundle.tokenizer, bundle.tagset, corpus,
                               effective_max_len(rc, bundle), rc.pipe.train.length_mode);
  out << report.to_table();
  if (!rc.report.empty()) write_text(rc.report, report.to_json(), out);
  return kOk;
}

int cmd_tag(const RunConfig& rc, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto bundle = load_model(rc.model);
  const auto text = read_text(rc.input, in);
  Corpus tagged;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto words = split_words(line);
    if (words.empty()) continue;
    tagged.sentences.push_back(predict_tags(bundle.params, bundle.tokenizer, bundle.tagset, words,
                                            effective_max_len(rc, bundle),
                                            rc.pipe.train.length_mode));
  }
  if (tagged.sentences.empty()) throw DataError("no input text to tag");
  write_text(rc.out.empty() ? "-" : rc.out, write_conll(tagged), out);
  err << "tag: " << tagged.size() << " sentences, " << tagged.word_count() << " words\n";
  return kOk;
}

int cmd_skeleton(const RunConfig& rc, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto bundle = load_model(rc.model);
  const auto text = read_text(rc.input, in);
  SkeletonConfig cfg;
  cfg.keep_lexical.insert(rc.keep_lexical.begin(), rc.keep_lexical.end());
  cfg.separator = rc.separator;
  const auto skeletons =
      skeletonize_text(bundle.params, bundle.tokenizer, bundle.tagset, text, cfg,
                       effective_max_len(rc, bundle),
                       [&](std::size_t line) { err << "warning: line " << line << " is blank, skipped\n"; });
  std::string joined;
  for (const auto& s : skeletons) joined += s + "\n";
  write_text(rc.out.empty() ? "-" : rc.out, joined, out);
  err << "skeleton: " << skeletons.size() << " sentences\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  RunConfig rc;
  CLI::App app{"Part-of-speech tagging and skeletal sentence structure toolkit", "sktag"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);

  auto* tok_cmd = app.add_subcommand("tokenizer-train", "Train a BPE tokenizer on corpus text");
  tok_cmd->add_option("--corpus", rc.corpus, "Tagged corpus (TSV)")->required();
  tok_cmd->add_option("--out", rc.out, "Tokenizer JSON output")->required();
  add_tokenizer_training(tok_cmd, rc);
  add_config(tok_cmd, rc);

  auto* aug_cmd = app.add_subcommand("augment", "Expand a corpus with sliding-window fragments");
  aug_cmd->add_option("--corpus", rc.corpus, "Tagged corpus (TSV)")->required();
  aug_cmd->add_option("--out", rc.out, "Augmented corpus output ('-' for stdout)")->required();
  add_windows(aug_cmd, rc, rc.augment_dedup);
  add_config(aug_cmd, rc);

  auto* pre_cmd = app.add_subcommand("pretrain", "Masked-token pretraining of the encoder");
  pre_cmd->add_option("--corpus", rc.corpus, "Corpus whose words are the pretraining text")
      ->required();
  pre_cmd->add_option("--out", rc.out, "Model file output")->required();
  pre_cmd->add_option("--tokenizer", rc.tokenizer, "Existing tokenizer JSON (default: train one)");
  pre_cmd->add_option("--mask-prob", rc.pipe.mlm.mask_probability, "Per-token masking probability");
  add_tokenizer_training(pre_cmd, rc);
  add_model_shape(pre_cmd, rc);
  add_optimizer(pre_cmd, rc);
  add_length(pre_cmd, rc);
  add_seed(pre_cmd, rc);
  add_config(pre_cmd, rc);

  auto* train_cmd = app.add_subcommand("train", "Fine-tune a token classifier");
  train_cmd->add_option("--corpus", rc.corpus, "Tagged training corpus (TSV)")->required();
  train_cmd->add_option("--val-corpus", rc.val_corpus,
                        "Validation corpus (default: split off --val-ratio)");
  train_cmd->add_option("--val-ratio", rc.val_ratio, "Validation fraction when splitting");
  train_cmd->add_option("--model", rc.model, "Start from this (pretrained) model file");
  train_cmd->add_option("--tokenizer", rc.tokenizer, "Existing tokenizer JSON (default: train one)");
  train_cmd->add_option("--out", rc.out, "Model file output")->required();
  train_cmd->add_option("--report", rc.report, "Validation report JSON output");
  train_cmd->add_option("--history", rc.history, "Epoch history JSONL (default: <out>.history.jsonl)");
  add_bool(train_cmd, "--augment", rc.pipe.augment_train, "Window-augment the training split");
  add_windows(train_cmd, rc, rc.train_dedup);
  add_tokenizer_training(train_cmd, rc);
  add_model_shape(train_cmd, rc);
  add_optimizer(train_cmd, rc);
  add_length(train_cmd, rc);
  add_seed(train_cmd, rc);
  add_config(train_cmd, rc);

  auto* eval_cmd = app.add_subcommand("eval", "Score a model on a tagged corpus");
  eval_cmd->add_option("--model", rc.model, "Model file")->required();
  eval_cmd->add_option("--corpus", rc.corpus, "Gold corpus (TSV)")->required();
  eval_cmd->add_option("--report", rc.report, "Report JSON output");
  add_length(eval_cmd, rc);
  add_config(eval_cmd, rc);

  auto* tag_cmd = app.add_subcommand("tag", "Tag raw text, one sentence per line");
  tag_cmd->add_option("--model", rc.model, "Model file")->required();
  tag_cmd->add_option("--input", rc.input, "Text file ('-' for stdin)");
  tag_cmd->add_option("--out", rc.out, "Tagged corpus output (default: stdout)");
  add_length(tag_cmd, rc);
  add_config(tag_cmd, rc);

  auto* skel_cmd = app.add_subcommand("skeleton", "Print the part-of-speech skeleton of raw text");
  skel_cmd->add_option("--model", rc.model, "Model file")->required();
  skel_cmd->add_option("--input", rc.input, "Text file ('-' for stdin)");
  skel_cmd->add_option("--out", rc.out, "Output file (default: stdout)");
  skel_cmd->add_option("--keep-lexical", rc.keep_lexical, "Tags whose words stay verbatim (TAG,TAG)")
      ->delimiter(',')
      ->default_str("none");
  skel_cmd->add_option("--separator", rc.separator, "Token separator")->default_str("\" \"");
  add_length(skel_cmd, rc);
  add_config(skel_cmd, rc);

  auto* inspect_cmd = app.add_subcommand("inspect", "Print a model file's metadata block");
  inspect_cmd->add_option("--model", rc.model, "Model file")->required();

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args, app);
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
    settle(rc, train_cmd->parsed());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (tok_cmd->parsed()) return cmd_tokenizer_train(rc, out);
    if (aug_cmd->parsed()) return cmd_augment(rc, out, err);
    if (pre_cmd->parsed()) return cmd_pretrain(rc, out, err);
    if (train_cmd->parsed()) return cmd_train(rc, out, err);
    if (eval_cmd->parsed()) return cmd_eval(rc, out);
    if (tag_cmd->parsed()) return cmd_tag(rc, in, out, err);
    if (skel_cmd->parsed()) return cmd_skeleton(rc, in, out, err);
    if (inspect_cmd->parsed()) {
      out << inspect_model(rc.model);
      return kOk;
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ModelError& e) {
    err << "error: " << e.what() << "\n";
    return kModelError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kModelError;
  }
  return kUsageError;
}

}  // namespace sktag::cli
