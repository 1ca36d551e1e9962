#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace sktag {

/// Dense row-major tensor. Matrices are [rows x cols]; vectors have one dim.
template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, T fill = T{})
      : shape(std::move(dims)), values(element_count(shape), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return dims.empty() ? 0
                        : std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                                          std::multiplies<>{});
  }

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  T* data() { return values.data(); }
  const T* data() const { return values.data(); }
  std::span<T> row(std::size_t r) { return {values.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }

  void fill(T v) { std::fill(values.begin(), values.end(), v); }

  bool operator==(const Tensor&) const = default;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Raw row-major kernels. All sizes are in elements.

/// out[m x n] = a[m x k] * b[k x n] (+ bias[n] when non-null)
template <class T>
void matmul(const T* a, const T* b, const T* bias, T* out, std::size_t m, std::size_t k,
            std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* out_row = out + i * n;
    if (bias) {
      std::copy(bias, bias + n, out_row);
    } else {
      std::fill(out_row, out_row + n, T{});
    }
    const T* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a_row[p];
      const T* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
    }
  }
}

/// grad_b[k x n] += a[m x k]^T * g[m x n]
template <class T>
void matmul_at_b_acc(const T* a, const T* g, T* grad_b, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* a_row = a + i * k;
    const T* g_row = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a_row[p];
      if (av == T{}) continue;
      T* out_row = grad_b + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += av * g_row[j];
    }
  }
}

/// grad_a[m x k] = g[m x n] * b[k x n]^T
template <class T>
void matmul_a_bt(const T* g, const T* b, T* grad_a, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* g_row = g + i * n;
    T* out_row = grad_a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T* b_row = b + p * n;
      T acc{};
      for (std::size_t j = 0; j < n; ++j) acc += g_row[j] * b_row[j];
      out_row[p] = acc;
    }
  }
}

/// bias_grad[n] += column sums of g[m x n]
template <class T>
void column_sum_acc(const T* g, T* bias_grad, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* g_row = g + i * n;
    for (std::size_t j = 0; j < n; ++j) bias_grad[j] += g_row[j];
  }
}

}  // namespace sktag
