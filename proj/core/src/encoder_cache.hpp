#pragma once

// Activations saved by the forward pass for the hand-written backward pass.

#include <vector>

#include "sktag/model.hpp"

namespace sktag::detail {

inline constexpr double kNormEpsilon = 1e-5;

template <class T>
struct NormCache {
  std::vector<T> normalized;  // [N x d]
  std::vector<T> inv_std;     // [N]
};

template <class T>
struct LayerCache {
  std::vector<T> input;  // [N x d]
  std::vector<T> query, key, value;
  std::vector<T> probs;    // [B x H x L x L]; zero on padded keys
  std::vector<T> context;  // [N x d]
  std::vector<T> attention_dropout;
  NormCache<T> attention_norm;
  std::vector<T> attention_normed;  // [N x d]
  std::vector<T> ff_pre;            // [N x d_ff], before GELU
  std::vector<T> ff_act;            // [N x d_ff]
  std::vector<T> ff_dropout;
  NormCache<T> ff_norm;
};

template <class T>
struct ForwardCache {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<T> embedding_dropout;  // scale per element; empty when dropout is off
  NormCache<T> embedding_norm;
  std::vector<LayerCache<T>> layers;
  std::vector<T> hidden;  // [N x d], final encoder output
};

/// Encoder body; returns the final hidden states in cache.hidden.
template <class T>
void encode(const BasicParams<T>& params, const Batch& batch, Mode mode,
            std::uint64_t dropout_seed, ForwardCache<T>& cache);

/// hidden [N x d] -> logits [N x C] through the chosen head.
template <class T>
std::vector<T> apply_head(const BasicParams<T>& params, Head head, const std::vector<T>& hidden,
                          std::size_t rows);

template <class T>
T gelu(T x);
template <class T>
T gelu_derivative(T x);

}  // namespace sktag::detail
