#pragma once

// Independent reference computations used to check the library. Nothing here
// calls into the code paths it verifies.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sktag/model.hpp"
#include "sktag/train.hpp"

namespace sktag::oracle {

// Windows by brute force over every (start, end) pair.
inline std::size_t count_windows(std::size_t n, std::size_t min_size, std::size_t max_size) {
  std::size_t count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t e = s + 1; e <= n; ++e) {
      const auto w = e - s;
      if (w >= min_size && w <= max_size) ++count;
    }
  }
  return count;
}

struct MetricValues {
  std::map<std::string, double> f1;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
};

// Enumerates classes and re-scans the word lists per class (one-vs-rest).
inline MetricValues brute_force_metrics(const std::vector<std::string>& pred,
                                        const std::vector<std::string>& gold,
                                        const std::vector<std::string>& classes) {
  MetricValues out;
  double weighted = 0.0;
  std::size_t total = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += pred[i] == gold[i];
  for (const auto& a : classes) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool p = pred[i] == a;
      const bool g = gold[i] == a;
      if (p && g) ++tp;
      if (p && !g) ++fp;
      if (!p && g) ++fn;
    }
    const long denom = 2 * tp + fp + fn;
    const double f1 = denom == 0 ? 0.0 : 2.0 * tp / static_cast<double>(denom);
    out.f1[a] = f1;
    weighted += static_cast<double>(tp + fn) * f1;
  }
  out.weighted_f1 = total ? weighted / static_cast<double>(total) : 0.0;
  out.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return out;
}

// Loss of the eval-mode network via the public forward pass only.
inline double loss_via_forward(const BasicParams<double>& params, const Batch& batch,
                               const std::vector<std::int32_t>& labels, Head head) {
  const auto logits = forward(params, batch, Mode::eval, head);
  double loss = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] == kIgnoreLabel) continue;
    const double* row = logits.values.data() + r * logits.n_classes;
    double mx = row[0];
    for (std::size_t k = 1; k < logits.n_classes; ++k) mx = std::max(mx, row[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < logits.n_classes; ++k) z += std::exp(row[k] - mx);
    loss += -(row[static_cast<std::size_t>(labels[r])] - mx - std::log(z));
    ++n;
  }
  return loss / static_cast<double>(n);
}

// Central difference of the loss with respect to one scalar parameter.
inline double finite_difference(BasicParams<double>& params, double& slot, const Batch& batch,
                                const std::vector<std::int32_t>& labels, Head head, double h) {
  const double saved = slot;
  slot = saved + h;
  const double up = loss_via_forward(params, batch, labels, head);
  slot = saved - h;
  const double down = loss_via_forward(params, batch, labels, head);
  slot = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace sktag::oracle
