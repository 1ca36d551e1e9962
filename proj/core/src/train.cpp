#include "sktag/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "encoder_cache.hpp"
#include "sktag/error.hpp"

namespace sktag {

namespace {

template <class T>
void norm_backward(const std::vector<T>& dy, const detail::NormCache<T>& cache,
                   const Tensor<T>& gain, Tensor<T>& dgain, Tensor<T>& dbias, std::size_t rows,
                   std::size_t d, std::vector<T>& dx) {
  dx.resize(rows * d);
  const T inv_d = T(1) / static_cast<T>(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dyr = dy.data() + r * d;
    const T* nr = cache.normalized.data() + r * d;
    T sum_dn{};
    T sum_dn_n{};
    for (std::size_t j = 0; j < d; ++j) {
      dgain.values[j] += dyr[j] * nr[j];
      dbias.values[j] += dyr[j];
      const T dn = dyr[j] * gain.values[j];
      sum_dn += dn;
      sum_dn_n += dn * nr[j];
    }
    T* dxr = dx.data() + r * d;
    const T inv_std = cache.inv_std[r];
    for (std::size_t j = 0; j < d; ++j) {
      const T dn = dyr[j] * gain.values[j];
      dxr[j] = inv_std * (dn - inv_d * sum_dn - nr[j] * inv_d * sum_dn_n);
    }
  }
}

template <class T>
void scale_by_mask(std::vector<T>& values, const std::vector<T>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= mask[i];
}

// dy += dx * w^T, dw += x^T * dx, db += colsum(dx), for out = x w + b.
template <class T>
void linear_backward(const std::vector<T>& x, const std::vector<T>& dout, const Tensor<T>& w,
                     Tensor<T>& dw, Tensor<T>& db, std::size_t rows, std::size_t in,
                     std::size_t out, std::vector<T>& dx, bool accumulate) {
  matmul_at_b_acc(x.data(), dout.data(), dw.data(), rows, in, out);
  column_sum_acc(dout.data(), db.data(), rows, out);
  if (!accumulate) {
    dx.resize(rows * in);
    matmul_a_bt(dout.data(), w.data(), dx.data(), rows, in, out);
    return;
  }
  std::vector<T> tmp(rows * in);
  matmul_a_bt(dout.data(), w.data(), tmp.data(), rows, in, out);
  for (std::size_t i = 0; i < tmp.size(); ++i) dx[i] += tmp[i];
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw DataError("epochs must be at least 1");
  if (batch_size < 1) throw DataError("batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw DataError("learning rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw DataError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw DataError("Adam epsilon must be positive");
  if (grad_clip_norm < 0.0) throw DataError("gradient clip norm must be non-negative");
  if (max_len < 3) throw DataError("max_len must be at least 3");
}

void MlmConfig::validate() const {
  if (!(mask_probability >= 0.0 && mask_probability <= 1.0)) {
    throw DataError("mask probability must lie in [0, 1]");
  }
  for (const double f : {replace_mask_fraction, replace_random_fraction, keep_fraction}) {
    if (f < 0.0) throw DataError("masking fractions must be non-negative");
  }
  if (std::abs(replace_mask_fraction + replace_random_fraction + keep_fraction - 1.0) > 1e-9) {
    throw DataError("masking fractions must sum to 1");
  }
}

std::string TrainHistory::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::json j = {{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val_weighted_f1", e.val_weighted_f1},
                        {"val_accuracy", e.val_accuracy},
                        {"wall_time", e.wall_time_seconds},
                        {"best", e.epoch == best_epoch}};
    out += j.dump() + "\n";
  }
  return out;
}

template <class T>
CrossEntropy<T> cross_entropy(std::span<const T> logits, std::size_t n_classes,
                              std::span<const std::int32_t> labels) {
  if (n_classes == 0 || logits.size() != labels.size() * n_classes) {
    throw ModelError("logits and labels disagree in shape");
  }
  CrossEntropy<T> out;
  out.grad.assign(logits.size(), T{});
  for (const auto l : labels) out.supervised += l != kIgnoreLabel;
  if (out.supervised == 0) throw DataError("batch has no supervised positions");
  const T inv_n = T(1) / static_cast<T>(out.supervised);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto label = labels[r];
    if (label == kIgnoreLabel) continue;
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
      throw DataError("label " + std::to_string(label) + " out of range");
    }
    const auto row = logits.subspan(r * n_classes, n_classes);
    std::span<T> g(out.grad.data() + r * n_classes, n_classes);
    softmax<T>(row, g);
    const T max_v = *std::max_element(row.begin(), row.end());
    T total{};
    for (const T v : row) total += std::exp(v - max_v);
    const T log_prob = row[static_cast<std::size_t>(label)] - max_v - std::log(total);
    out.loss -= log_prob * inv_n;
    g[static_cast<std::size_t>(label)] -= T(1);
    for (auto& v : g) v *= inv_n;
  }
  return out;
}

template <class T>
GradientResult<T> compute_gradients(const BasicParams<T>& params, const Batch& batch,
                                    std::span<const std::int32_t> labels, Head head, Mode mode,
                                    std::uint64_t dropout_seed) {
  const auto& c = params.config;
  const std::size_t B = batch.batch_size;
  const std::size_t L = batch.seq_len;
  const std::size_t N = B * L;
  const std::size_t d = c.d_model;
  const std::size_t H = c.n_heads;
  const std::size_t dh = c.head_dim();
  const std::size_t dff = c.d_ff;
  if (labels.size() != N) throw ModelError("labels do not match the batch shape");

  detail::ForwardCache<T> cache;
  detail::encode(params, batch, mode, dropout_seed, cache);
  const auto logits = detail::apply_head(params, head, cache.hidden, N);
  const std::size_t n_classes = logits.size() / N;
  auto ce = cross_entropy<T>(logits, n_classes, labels);

  GradientResult<T> result;
  result.loss = ce.loss;
  result.grads = params.zeros_like();
  auto& g = result.grads;

  std::vector<T> dh_buf;
  if (head == Head::tags) {
    linear_backward(cache.hidden, ce.grad, params.classifier_weight, g.classifier_weight,
                    g.classifier_bias, N, d, n_classes, dh_buf, false);
  } else {
    linear_backward(cache.hidden, ce.grad, params.mlm_weight, g.mlm_weight, g.mlm_bias, N, d,
                    n_classes, dh_buf, false);
  }

  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<T> dy, da, dff_out, dact, dinput, dctx, dq, dk, dv, dp(L);
  for (std::size_t li = c.n_layers; li-- > 0;) {
    const auto& lp = params.layers[li];
    const auto& lc = cache.layers[li];
    auto& lg = g.layers[li];

    // out = norm(dropout(ff(a)) + a)
    norm_backward(dh_buf, lc.ff_norm, lp.ff_norm_gain, lg.ff_norm_gain, lg.ff_norm_bias, N, d, dy);
    da = dy;
    dff_out = dy;
    scale_by_mask(dff_out, lc.ff_dropout);
    linear_backward(lc.ff_act, dff_out, lp.ff_out_weight, lg.ff_out_weight, lg.ff_out_bias, N, dff,
                    d, dact, false);
    for (std::size_t i = 0; i < N * dff; ++i) dact[i] *= detail::gelu_derivative(lc.ff_pre[i]);
    linear_backward(lc.attention_normed, dact, lp.ff_in_weight, lg.ff_in_weight, lg.ff_in_bias, N,
                    d, dff, da, true);

    // a = norm(dropout(attention(x)) + x)
    norm_backward(da, lc.attention_norm, lp.attention_norm_gain, lg.attention_norm_gain,
                  lg.attention_norm_bias, N, d, dy);
    dinput = dy;
    scale_by_mask(dy, lc.attention_dropout);
    linear_backward(lc.context, dy, lp.output_weight, lg.output_weight, lg.output_bias, N, d, d,
                    dctx, false);

    dq.assign(N * d, T{});
    dk.assign(N * d, T{});
    dv.assign(N * d, T{});
    for (std::size_t b = 0; b < B; ++b) {
      const std::uint8_t* mask = batch.mask.data() + b * L;
      for (std::size_t hd = 0; hd < H; ++hd) {
        const std::size_t off = hd * dh;
        for (std::size_t i = 0; i < L; ++i) {
          const T* p = lc.probs.data() + ((b * H + hd) * L + i) * L;
          const T* dc = dctx.data() + (b * L + i) * d + off;
          T weighted{};
          for (std::size_t j = 0; j < L; ++j) {
            if (!mask[j]) continue;
            const T* v = lc.value.data() + (b * L + j) * d + off;
            T* dvj = dv.data() + (b * L + j) * d + off;
            T acc{};
            for (std::size_t e = 0; e < dh; ++e) {
              acc += dc[e] * v[e];
              dvj[e] += p[j] * dc[e];
            }
            dp[j] = acc;
            weighted += p[j] * acc;
          }
          const T* q = lc.query.data() + (b * L + i) * d + off;
          T* dqi = dq.data() + (b * L + i) * d + off;
          for (std::size_t j = 0; j < L; ++j) {
            if (!mask[j]) continue;
            const T ds = p[j] * (dp[j] - weighted) * scale;
            const T* k = lc.key.data() + (b * L + j) * d + off;
            T* dkj = dk.data() + (b * L + j) * d + off;
            for (std::size_t e = 0; e < dh; ++e) {
              dqi[e] += ds * k[e];
              dkj[e] += ds * q[e];
            }
          }
        }
      }
    }
    linear_backward(lc.input, dq, lp.query_weight, lg.query_weight, lg.query_bias, N, d, d, dinput,
                    true);
    linear_backward(lc.input, dk, lp.key_weight, lg.key_weight, lg.key_bias, N, d, d, dinput, true);
    linear_backward(lc.input, dv, lp.value_weight, lg.value_weight, lg.value_bias, N, d, d, dinput,
                    true);
    dh_buf.swap(dinput);
  }

  scale_by_mask(dh_buf, cache.embedding_dropout);
  norm_backward(dh_buf, cache.embedding_norm, params.embedding_norm_gain, g.embedding_norm_gain,
                g.embedding_norm_bias, N, d, dy);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < L; ++t) {
      const auto id = static_cast<std::size_t>(batch.ids[b * L + t]);
      const T* src = dy.data() + (b * L + t) * d;
      T* te = g.token_embeddings.data() + id * d;
      T* pe = g.position_embeddings.data() + t * d;
      for (std::size_t j = 0; j < d; ++j) {
        te[j] += src[j];
        pe[j] += src[j];
      }
    }
  }
  return result;
}

template <class T>
double global_norm(const BasicParams<T>& grads) {
  double sum = 0.0;
  for (const auto& [name, t] : grads.named_tensors()) {
    for (const T v : t->values) sum += static_cast<double>(v) * static_cast<double>(v);
  }
  return std::sqrt(sum);
}

template <class T>
void adam_step(BasicParams<T>& params, const BasicParams<T>& grads, OptimizerState<T>& state,
               const TrainConfig& cfg) {
  auto p_named = params.named_tensors();
  const auto g_named = grads.named_tensors();
  auto m_named = state.first_moment.named_tensors();
  auto v_named = state.second_moment.named_tensors();
  if (g_named.size() != p_named.size() || m_named.size() != p_named.size() ||
      v_named.size() != p_named.size()) {
    throw ModelError("optimizer state does not mirror the parameters");
  }
  for (std::size_t i = 0; i < p_named.size(); ++i) {
    if (g_named[i].second->shape != p_named[i].second->shape ||
        m_named[i].second->shape != p_named[i].second->shape) {
      throw ModelError("gradient shape mismatch for '" + p_named[i].first + "'");
    }
    for (const T v : g_named[i].second->values) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw ModelError("non-finite gradient in tensor '" + g_named[i].first + "'");
      }
    }
  }

  double clip = 1.0;
  if (cfg.grad_clip_norm > 0.0) {
    const double norm = global_norm(grads);
    if (norm > cfg.grad_clip_norm) clip = cfg.grad_clip_norm / norm;
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < p_named.size(); ++i) {
    auto& theta = p_named[i].second->values;
    const auto& grad = g_named[i].second->values;
    auto& m = m_named[i].second->values;
    auto& v = v_named[i].second->values;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = static_cast<double>(grad[k]) * clip;
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      theta[k] = static_cast<T>(static_cast<double>(theta[k]) -
                                cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon));
    }
  }
}

MaskedEncoding mask_tokens(const Encoding& enc, const MlmConfig& cfg, const Tokenizer& tok,
                           Rng& rng) {
  cfg.validate();
  MaskedEncoding out{enc, std::vector<std::int32_t>(enc.length(), kIgnoreLabel)};
  if (cfg.mask_probability <= 0.0) return out;
  const auto first_regular = static_cast<std::uint64_t>(kNumSpecials);
  const auto vocab = static_cast<std::uint64_t>(tok.vocab_size());
  for (std::size_t t = 0; t < enc.length(); ++t) {
    const auto id = enc.ids[t];
    if (!enc.attention_mask[t] || id < static_cast<TokenId>(kNumSpecials)) continue;
    if (rng.uniform() >= cfg.mask_probability) continue;
    out.targets[t] = id;
    const double r = rng.uniform();
    if (r < cfg.replace_mask_fraction) {
      out.encoding.ids[t] = kMaskId;
    } else if (r < cfg.replace_mask_fraction + cfg.replace_random_fraction && vocab > first_regular) {
      out.encoding.ids[t] = static_cast<TokenId>(first_regular + rng.below(vocab - first_regular));
    }
  }
  return out;
}

MaskedEncoding mask_tokens(const Encoding& enc, const MlmConfig& cfg, const Tokenizer& tok) {
  Rng rng(cfg.seed);
  return mask_tokens(enc, cfg, tok, rng);
}

PretrainResult pretrain_mlm(const ModelConfig& config, const Tokenizer& tok,
                            std::span<const std::vector<std::string>> texts,
                            const MlmConfig& mlm_cfg, const TrainConfig& train_cfg,
                            const std::function<void(std::size_t, double)>& on_epoch) {
  mlm_cfg.validate();
  train_cfg.validate();
  if (texts.empty()) throw DataError("pretraining needs at least one text");
  if (config.vocab_size != tok.vocab_size()) {
    throw ModelError("model vocab_size does not match the tokenizer");
  }

  std::vector<Encoding> encodings;
  for (const auto& words : texts) {
    if (words.empty()) continue;
    auto enc = tok.encode_sentence(words, std::min(train_cfg.max_len, config.max_len),
                                   train_cfg.length_mode);
    if (!enc.word_starts.empty()) encodings.push_back(std::move(enc));
  }
  if (encodings.empty()) throw DataError("pretraining texts contain no encodable words");

  PretrainResult result{init_model(config, /*with_mlm_head=*/true), {}};
  auto& params = result.params;
  auto state = OptimizerState<float>::zeros_for(params);
  std::vector<std::size_t> order(encodings.size());
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (train_cfg.shuffle) {
      Rng shuffle_rng(derive_seed(train_cfg.seed, epoch));
      shuffle_rng.shuffle(std::span(order));
    }
    Rng mask_rng(derive_seed(mlm_cfg.seed, epoch));
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_size) {
      const auto stop = std::min(order.size(), start + train_cfg.batch_size);
      std::vector<Encoding> masked;
      std::vector<std::int32_t> targets;
      for (std::size_t k = start; k < stop; ++k) {
        auto m = mask_tokens(encodings[order[k]], mlm_cfg, tok, mask_rng);
        masked.push_back(std::move(m.encoding));
        targets.insert(targets.end(), m.targets.begin(), m.targets.end());
      }
      auto batch = make_batch(masked, /*trim=*/true);
      // Drop the trimmed padding columns from the per-position targets.
      const std::size_t full = masked.front().length();
      std::vector<std::int32_t> labels;
      labels.reserve(batch.batch_size * batch.seq_len);
      bool supervised = false;
      for (std::size_t b = 0; b < batch.batch_size; ++b) {
        for (std::size_t t = 0; t < batch.seq_len; ++t) {
          labels.push_back(targets[b * full + t]);
          supervised = supervised || labels.back() != kIgnoreLabel;
        }
      }
      if (!supervised) continue;
      const auto grad = compute_gradients<float>(params, batch, labels, Head::mlm, Mode::train,
                                                 derive_seed(train_cfg.seed ^ 0x6d6c6dULL, step++));
      adam_step(params, grad.grads, state, train_cfg);
      loss_sum += grad.loss;
      ++loss_batches;
    }
    const double epoch_loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    result.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch + 1, epoch_loss);
  }
  return result;
}

EvalReport evaluate(const ModelParams& params, const Tokenizer& tok, const TagSet& tagset,
                    const Corpus& gold, std::size_t max_len, LengthMode mode) {
  if (gold.sentences.empty()) throw DataError("evaluation corpus is empty");
  std::vector<TaggedSentence> pred;
  pred.reserve(gold.size());
  for (const auto& s : gold.sentences) {
    pred.push_back(predict_tags(params, tok, tagset, s.words, max_len, mode));
  }
  return make_report(confusion_counts(pred, gold.sentences, tagset));
}

TrainResult train_token_classifier(ModelParams init, const Corpus& train, const Corpus& val,
                                   const Tokenizer& tok, const TagSet& tagset,
                                   const TrainConfig& cfg,
                                   const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train.sentences.empty()) throw DataError("training corpus is empty");
  if (val.sentences.empty()) throw DataError("validation corpus is empty");
  for (const auto* corpus : {&train, &val}) {
    for (const auto& s : corpus->sentences) {
      for (const auto& t : s.tags) {
        if (!tagset.contains(t)) {
          throw DataError(corpus->source_name + ": tag '" + t + "' is not in the model's tag set");
        }
      }
    }
  }
  if (init.config.n_tags != tagset.size()) {
    throw ModelError("model predicts " + std::to_string(init.config.n_tags) + " tags, tag set has " +
                     std::to_string(tagset.size()));
  }
  if (init.config.vocab_size != tok.vocab_size()) {
    throw ModelError("model vocab_size does not match the tokenizer");
  }
  const std::size_t max_len = std::min(cfg.max_len, init.config.max_len);

  std::vector<Encoding> encodings;
  encodings.reserve(train.size());
  for (const auto& s : train.sentences) {
    auto enc = tok.encode_sentence(s, tagset, max_len, cfg.length_mode);
    if (!enc.word_starts.empty()) encodings.push_back(std::move(enc));
  }
  if (encodings.empty()) throw DataError("no training sentence survives encoding");

  TrainResult result{init, {}};
  ModelParams params = std::move(init);
  auto state = OptimizerState<float>::zeros_for(params);
  std::vector<std::size_t> order(encodings.size());
  double best_f1 = -1.0;
  std::uint64_t step = 0;
  const auto start_time = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      Rng rng(derive_seed(cfg.seed, epoch));
      rng.shuffle(std::span(order));
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const auto end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<Encoding> chunk;
      chunk.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) chunk.push_back(encodings[order[k]]);
      const auto batch = make_batch(chunk, /*trim=*/true);
      const auto grad = compute_gradients<float>(params, batch, batch.labels, Head::tags,
                                                 Mode::train, derive_seed(cfg.seed, 1000003 + step++));
      adam_step(params, grad.grads, state, cfg);
      loss_sum += grad.loss;
      ++batches;
    }

    const auto report = evaluate(params, tok, tagset, val, max_len, cfg.length_mode);
    EpochRecord record;
    record.epoch = epoch + 1;
    record.train_loss = loss_sum / static_cast<double>(batches);
    record.val_weighted_f1 = report.weighted_f1;
    record.val_accuracy = report.accuracy;
    record.wall_time_seconds = seconds_since(start_time);
    if (!std::isfinite(record.train_loss)) {
      throw ModelError("training loss became non-finite at epoch " + std::to_string(record.epoch));
    }
    if (record.val_weighted_f1 > best_f1) {
      best_f1 = record.val_weighted_f1;
      result.params = params;
      result.history.best_epoch = record.epoch;
    }
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

template CrossEntropy<float> cross_entropy(std::span<const float>, std::size_t,
                                           std::span<const std::int32_t>);
template CrossEntropy<double> cross_entropy(std::span<const double>, std::size_t,
                                            std::span<const std::int32_t>);
template GradientResult<float> compute_gradients(const BasicParams<float>&, const Batch&,
                                                 std::span<const std::int32_t>, Head, Mode,
                                                 std::uint64_t);
template GradientResult<double> compute_gradients(const BasicParams<double>&, const Batch&,
                                                  std::span<const std::int32_t>, Head, Mode,
                                                  std::uint64_t);
template double global_norm(const BasicParams<float>&);
template double global_norm(const BasicParams<double>&);
template void adam_step(BasicParams<float>&, const BasicParams<float>&, OptimizerState<float>&,
                        const TrainConfig&);
template void adam_step(BasicParams<double>&, const BasicParams<double>&, OptimizerState<double>&,
                        const TrainConfig&);

}  // namespace sktag
