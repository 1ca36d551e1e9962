#include "sktag/model.hpp"

#include <cmath>
#include <limits>

#include "encoder_cache.hpp"
#include "sktag/error.hpp"
#include "sktag/random.hpp"

namespace sktag {

namespace {

constexpr double kInitStd = 0.02;

template <class T>
Tensor<T> random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values) v = static_cast<T>(rng.truncated_normal(kInitStd));
  return t;
}

template <class T>
void dropout_mask(std::vector<T>& mask, std::size_t n, double rate, Rng& rng) {
  mask.resize(n);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = rng.uniform() < rate ? T{} : keep_scale;
}

template <class T>
void apply_mask(std::vector<T>& values, const std::vector<T>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= mask[i];
}

template <class T>
void layer_norm(const std::vector<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                std::size_t rows, std::size_t d, detail::NormCache<T>& cache, std::vector<T>& out) {
  cache.normalized.resize(rows * d);
  cache.inv_std.resize(rows);
  out.resize(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * d;
    T mean{};
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<T>(d);
    T var{};
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(d);
    const T inv_std = T{1} / std::sqrt(var + static_cast<T>(detail::kNormEpsilon));
    cache.inv_std[r] = inv_std;
    T* nr = cache.normalized.data() + r * d;
    T* yr = out.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      nr[j] = (xr[j] - mean) * inv_std;
      yr[j] = nr[j] * gain.values[j] + bias.values[j];
    }
  }
}

template <class T>
EncoderLayer<T> init_layer(const ModelConfig& c, Rng& rng) {
  const auto d = c.d_model;
  EncoderLayer<T> layer;
  layer.query_weight = random_tensor<T>({d, d}, rng);
  layer.query_bias = Tensor<T>({d});
  layer.key_weight = random_tensor<T>({d, d}, rng);
  layer.key_bias = Tensor<T>({d});
  layer.value_weight = random_tensor<T>({d, d}, rng);
  layer.value_bias = Tensor<T>({d});
  layer.output_weight = random_tensor<T>({d, d}, rng);
  layer.output_bias = Tensor<T>({d});
  layer.attention_norm_gain = Tensor<T>({d}, T{1});
  layer.attention_norm_bias = Tensor<T>({d});
  layer.ff_in_weight = random_tensor<T>({d, c.d_ff}, rng);
  layer.ff_in_bias = Tensor<T>({c.d_ff});
  layer.ff_out_weight = random_tensor<T>({c.d_ff, d}, rng);
  layer.ff_out_bias = Tensor<T>({d});
  layer.ff_norm_gain = Tensor<T>({d}, T{1});
  layer.ff_norm_bias = Tensor<T>({d});
  return layer;
}

template <class P, class Self>
std::vector<std::pair<std::string, P>> collect_named(Self& self) {
  std::vector<std::pair<std::string, P>> out;
  out.emplace_back("token_embeddings", &self.token_embeddings);
  out.emplace_back("position_embeddings", &self.position_embeddings);
  out.emplace_back("embedding_norm.gain", &self.embedding_norm_gain);
  out.emplace_back("embedding_norm.bias", &self.embedding_norm_bias);
  for (std::size_t i = 0; i < self.layers.size(); ++i) {
    auto& l = self.layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    out.emplace_back(p + "attention.query.weight", &l.query_weight);
    out.emplace_back(p + "attention.query.bias", &l.query_bias);
    out.emplace_back(p + "attention.key.weight", &l.key_weight);
    out.emplace_back(p + "attention.key.bias", &l.key_bias);
    out.emplace_back(p + "attention.value.weight", &l.value_weight);
    out.emplace_back(p + "attention.value.bias", &l.value_bias);
    out.emplace_back(p + "attention.output.weight", &l.output_weight);
    out.emplace_back(p + "attention.output.bias", &l.output_bias);
    out.emplace_back(p + "attention_norm.gain", &l.attention_norm_gain);
    out.emplace_back(p + "attention_norm.bias", &l.attention_norm_bias);
    out.emplace_back(p + "ff.in.weight", &l.ff_in_weight);
    out.emplace_back(p + "ff.in.bias", &l.ff_in_bias);
    out.emplace_back(p + "ff.out.weight", &l.ff_out_weight);
    out.emplace_back(p + "ff.out.bias", &l.ff_out_bias);
    out.emplace_back(p + "ff_norm.gain", &l.ff_norm_gain);
    out.emplace_back(p + "ff_norm.bias", &l.ff_norm_bias);
  }
  out.emplace_back("classifier.weight", &self.classifier_weight);
  out.emplace_back("classifier.bias", &self.classifier_bias);
  if (self.has_mlm_head()) {
    out.emplace_back("mlm.weight", &self.mlm_weight);
    out.emplace_back("mlm.bias", &self.mlm_bias);
  }
  return out;
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += " x ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ModelError("invalid model config: " + what); };
  if (vocab_size <= kNumSpecials) fail("vocab_size must exceed the special tokens");
  if (max_len < 3) fail("max_len must be at least 3");
  if (d_model == 0) fail("d_model must be positive");
  if (n_heads == 0) fail("n_heads must be positive");
  if (d_model % n_heads != 0) {
    fail("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
         std::to_string(n_heads));
  }
  if (n_layers == 0) fail("n_layers must be positive");
  if (d_ff == 0) fail("d_ff must be positive");
  if (n_tags == 0) fail("n_tags must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>*>> BasicParams<T>::named_tensors() {
  return collect_named<Tensor<T>*>(*this);
}

template <class T>
std::vector<std::pair<std::string, const Tensor<T>*>> BasicParams<T>::named_tensors() const {
  return collect_named<const Tensor<T>*>(*this);
}

template <class T>
BasicParams<T> BasicParams<T>::zeros_like() const {
  BasicParams<T> out = *this;
  for (auto& [name, t] : out.named_tensors()) t->fill(T{});
  return out;
}

template <class T>
template <class U>
BasicParams<U> BasicParams<T>::cast() const {
  BasicParams<U> out;
  out.config = config;
  out.layers.resize(layers.size());
  auto src = named_tensors();
  if (has_mlm_head()) {
    out.mlm_weight.values.resize(1);  // make the MLM head visible in named_tensors()
  }
  auto dst = out.named_tensors();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i].second->shape = src[i].second->shape;
    dst[i].second->values.assign(src[i].second->values.begin(), src[i].second->values.end());
  }
  return out;
}

ModelParams init_model(const ModelConfig& config, bool with_mlm_head) {
  config.validate();
  Rng rng(config.seed);
  ModelParams p;
  p.config = config;
  const auto d = config.d_model;
  p.token_embeddings = random_tensor<float>({config.vocab_size, d}, rng);
  p.position_embeddings = random_tensor<float>({config.max_len, d}, rng);
  p.embedding_norm_gain = Tensor<float>({d}, 1.0f);
  p.embedding_norm_bias = Tensor<float>({d});
  for (std::size_t i = 0; i < config.n_layers; ++i) p.layers.push_back(init_layer<float>(config, rng));
  p.classifier_weight = random_tensor<float>({d, config.n_tags}, rng);
  p.classifier_bias = Tensor<float>({config.n_tags});
  if (with_mlm_head) reset_mlm_head(p, config.seed);
  return p;
}

void reset_classifier(ModelParams& params, std::size_t n_tags, std::uint64_t seed) {
  if (n_tags == 0) throw ModelError("classifier needs at least one tag");
  Rng rng(derive_seed(seed, 2));
  params.config.n_tags = n_tags;
  params.classifier_weight = random_tensor<float>({params.config.d_model, n_tags}, rng);
  params.classifier_bias = Tensor<float>({n_tags});
}

void reset_mlm_head(ModelParams& params, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 1));
  params.mlm_weight = random_tensor<float>({params.config.d_model, params.config.vocab_size}, rng);
  params.mlm_bias = Tensor<float>({params.config.vocab_size});
}

Batch make_batch(std::span<const Encoding> encodings, bool trim) {
  if (encodings.empty()) throw DataError("empty batch");
  const std::size_t full = encodings.front().length();
  std::size_t len = full;
  bool labels = true;
  for (const auto& e : encodings) {
    if (e.length() != full || e.attention_mask.size() != full) {
      throw DataError("encodings in a batch must share one length");
    }
    labels = labels && e.has_labels();
  }
  if (trim) {
    len = 0;
    for (const auto& e : encodings) {
      for (std::size_t t = full; t > 0; --t) {
        if (e.attention_mask[t - 1]) {
          len = std::max(len, t);
          break;
        }
      }
    }
  }
  Batch b;
  b.batch_size = encodings.size();
  b.seq_len = len;
  b.ids.reserve(b.batch_size * len);
  b.mask.reserve(b.batch_size * len);
  for (const auto& e : encodings) {
    b.ids.insert(b.ids.end(), e.ids.begin(), e.ids.begin() + static_cast<std::ptrdiff_t>(len));
    b.mask.insert(b.mask.end(), e.attention_mask.begin(),
                  e.attention_mask.begin() + static_cast<std::ptrdiff_t>(len));
    if (labels) {
      b.labels.insert(b.labels.end(), e.label_ids.begin(),
                      e.label_ids.begin() + static_cast<std::ptrdiff_t>(len));
    }
  }
  return b;
}

namespace detail {

template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
}

template <class T>
T gelu_derivative(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
  const T pdf = std::exp(T(-0.5) * x * x) * static_cast<T>(0.5 * M_2_SQRTPI * M_SQRT1_2);
  return cdf + x * pdf;
}

template <class T>
void encode(const BasicParams<T>& params, const Batch& batch, Mode mode,
            std::uint64_t dropout_seed, ForwardCache<T>& cache) {
  const auto& c = params.config;
  const std::size_t B = batch.batch_size;
  const std::size_t L = batch.seq_len;
  const std::size_t N = B * L;
  const std::size_t d = c.d_model;
  const std::size_t H = c.n_heads;
  const std::size_t dh = c.head_dim();
  const std::size_t dff = c.d_ff;

  if (batch.ids.size() != N || batch.mask.size() != N) throw ModelError("batch shape mismatch");
  if (L == 0 || L > c.max_len) {
    throw ModelError("sequence length " + std::to_string(L) + " outside [1, " +
                     std::to_string(c.max_len) + "]");
  }
  for (const auto id : batch.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
      throw ModelError("token id " + std::to_string(id) + " out of range for vocab size " +
                       std::to_string(c.vocab_size));
    }
  }

  const bool dropout = mode == Mode::train && c.dropout_rate > 0.0;
  Rng rng(dropout_seed);
  cache.batch_size = B;
  cache.seq_len = L;
  cache.layers.resize(c.n_layers);

  std::vector<T> x(N * d);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < L; ++t) {
      const auto id = static_cast<std::size_t>(batch.ids[b * L + t]);
      const T* te = params.token_embeddings.data() + id * d;
      const T* pe = params.position_embeddings.data() + t * d;
      T* xr = x.data() + (b * L + t) * d;
      for (std::size_t j = 0; j < d; ++j) xr[j] = te[j] + pe[j];
    }
  }
  std::vector<T> h;
  layer_norm(x, params.embedding_norm_gain, params.embedding_norm_bias, N, d,
             cache.embedding_norm, h);
  cache.embedding_dropout.clear();
  if (dropout) {
    dropout_mask(cache.embedding_dropout, N * d, c.dropout_rate, rng);
    apply_mask(h, cache.embedding_dropout);
  }

  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<T> scores(L);
  for (std::size_t li = 0; li < c.n_layers; ++li) {
    const auto& lp = params.layers[li];
    auto& lc = cache.layers[li];
    lc.input = h;
    lc.query.resize(N * d);
    lc.key.resize(N * d);
    lc.value.resize(N * d);
    matmul(h.data(), lp.query_weight.data(), lp.query_bias.data(), lc.query.data(), N, d, d);
    matmul(h.data(), lp.key_weight.data(), lp.key_bias.data(), lc.key.data(), N, d, d);
    matmul(h.data(), lp.value_weight.data(), lp.value_bias.data(), lc.value.data(), N, d, d);

    lc.probs.assign(B * H * L * L, T{});
    lc.context.assign(N * d, T{});
    for (std::size_t b = 0; b < B; ++b) {
      const std::uint8_t* mask = batch.mask.data() + b * L;
      for (std::size_t hd = 0; hd < H; ++hd) {
        const std::size_t off = hd * dh;
        for (std::size_t i = 0; i < L; ++i) {
          const T* q = lc.query.data() + (b * L + i) * d + off;
          T max_score = -std::numeric_limits<T>::infinity();
          for (std::size_t j = 0; j < L; ++j) {
            if (!mask[j]) continue;
            const T* k = lc.key.data() + (b * L + j) * d + off;
            T s{};
            for (std::size_t e = 0; e < dh; ++e) s += q[e] * k[e];
            scores[j] = s * scale;
            max_score = std::max(max_score, scores[j]);
          }
          T* p = lc.probs.data() + ((b * H + hd) * L + i) * L;
          T total{};
          for (std::size_t j = 0; j < L; ++j) {
            if (!mask[j]) continue;
            p[j] = std::exp(scores[j] - max_score);
            total += p[j];
          }
          T* ctx = lc.context.data() + (b * L + i) * d + off;
          for (std::size_t j = 0; j < L; ++j) {
            if (!mask[j]) continue;
            p[j] /= total;
            const T* v = lc.value.data() + (b * L + j) * d + off;
            for (std::size_t e = 0; e < dh; ++e) ctx[e] += p[j] * v[e];
          }
        }
      }
    }

    std::vector<T> attn(N * d);
    matmul(lc.context.data(), lp.output_weight.data(), lp.output_bias.data(), attn.data(), N, d, d);
    lc.attention_dropout.clear();
    if (dropout) {
      dropout_mask(lc.attention_dropout, N * d, c.dropout_rate, rng);
      apply_mask(attn, lc.attention_dropout);
    }
    for (std::size_t i = 0; i < N * d; ++i) attn[i] += h[i];
    layer_norm(attn, lp.attention_norm_gain, lp.attention_norm_bias, N, d, lc.attention_norm,
               lc.attention_normed);

    lc.ff_pre.resize(N * dff);
    matmul(lc.attention_normed.data(), lp.ff_in_weight.data(), lp.ff_in_bias.data(),
           lc.ff_pre.data(), N, d, dff);
    lc.ff_act.resize(N * dff);
    for (std::size_t i = 0; i < N * dff; ++i) lc.ff_act[i] = gelu(lc.ff_pre[i]);
    std::vector<T> ff(N * d);
    matmul(lc.ff_act.data(), lp.ff_out_weight.data(), lp.ff_out_bias.data(), ff.data(), N, dff, d);
    lc.ff_dropout.clear();
    if (dropout) {
      dropout_mask(lc.ff_dropout, N * d, c.dropout_rate, rng);
      apply_mask(ff, lc.ff_dropout);
    }
    for (std::size_t i = 0; i < N * d; ++i) ff[i] += lc.attention_normed[i];
    layer_norm(ff, lp.ff_norm_gain, lp.ff_norm_bias, N, d, lc.ff_norm, h);
  }
  cache.hidden = std::move(h);
}

template <class T>
std::vector<T> apply_head(const BasicParams<T>& params, Head head, const std::vector<T>& hidden,
                          std::size_t rows) {
  const auto d = params.config.d_model;
  const Tensor<T>& w = head == Head::tags ? params.classifier_weight : params.mlm_weight;
  const Tensor<T>& bias = head == Head::tags ? params.classifier_bias : params.mlm_bias;
  if (w.empty()) throw ModelError("model has no masked-token prediction head");
  const auto n = w.cols();
  std::vector<T> out(rows * n);
  matmul(hidden.data(), w.data(), bias.data(), out.data(), rows, d, n);
  return out;
}

}  // namespace detail

template <class T>
Logits<T> forward(const BasicParams<T>& params, const Batch& batch, Mode mode, Head head,
                  std::uint64_t dropout_seed) {
  detail::ForwardCache<T> cache;
  detail::encode(params, batch, mode, dropout_seed, cache);
  Logits<T> logits;
  logits.batch_size = batch.batch_size;
  logits.seq_len = batch.seq_len;
  logits.values = detail::apply_head(params, head, cache.hidden, batch.batch_size * batch.seq_len);
  logits.n_classes = logits.values.size() / std::max<std::size_t>(1, batch.batch_size * batch.seq_len);
  return logits;
}

template <class T>
void softmax(std::span<const T> logits, std::span<T> probs) {
  if (logits.empty()) return;
  const T max_v = *std::max_element(logits.begin(), logits.end());
  T total{};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_v);
    total += probs[i];
  }
  for (auto& p : probs) p /= total;
}

TaggedSentence predict_tags(const ModelParams& params, const Tokenizer& tok, const TagSet& tagset,
                            std::span<const std::string> words, std::size_t max_len,
                            LengthMode mode) {
  if (words.empty()) throw DataError("cannot tag an empty word list");
  if (tagset.size() != params.config.n_tags) {
    throw ModelError("tag set has " + std::to_string(tagset.size()) + " tags but the model predicts " +
                     std::to_string(params.config.n_tags));
  }
  const auto enc = tok.encode_sentence(words, max_len, mode);
  if (enc.word_starts.empty()) throw DataError("every word was truncated away by max_len");
  const auto batch = make_batch(std::span(&enc, 1), /*trim=*/true);
  const auto logits = forward(params, batch, Mode::eval, Head::tags);
  TaggedSentence out;
  for (std::size_t w = 0; w < enc.word_starts.size(); ++w) {
    out.words.push_back(words[w]);
    const auto best = argmax(logits.row(0, enc.word_starts[w]));
    out.tags.push_back(tagset.tag(static_cast<std::int32_t>(best)));
  }
  return out;
}

template struct BasicParams<float>;
template struct BasicParams<double>;
template BasicParams<double> BasicParams<float>::cast<double>() const;
template BasicParams<float> BasicParams<double>::cast<float>() const;
template BasicParams<float> BasicParams<float>::cast<float>() const;
template BasicParams<double> BasicParams<double>::cast<double>() const;

template Logits<float> forward(const BasicParams<float>&, const Batch&, Mode, Head, std::uint64_t);
template Logits<double> forward(const BasicParams<double>&, const Batch&, Mode, Head, std::uint64_t);
template void softmax<float>(std::span<const float>, std::span<float>);
template void softmax<double>(std::span<const double>, std::span<double>);

namespace detail {
template float gelu(float);
template double gelu(double);
template float gelu_derivative(float);
template double gelu_derivative(double);
template void encode(const BasicParams<float>&, const Batch&, Mode, std::uint64_t, ForwardCache<float>&);
template void encode(const BasicParams<double>&, const Batch&, Mode, std::uint64_t, ForwardCache<double>&);
template std::vector<float> apply_head(const BasicParams<float>&, Head, const std::vector<float>&, std::size_t);
template std::vector<double> apply_head(const BasicParams<double>&, Head, const std::vector<double>&, std::size_t);
}  // namespace detail

}  // namespace sktag
