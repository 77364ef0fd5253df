#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "nnlm/error.hpp"

namespace nnlm {

inline constexpr double kProbEpsilon = 1e-7;

inline double clamped_sigmoid(double z) {
  const double p = 1.0 / (1.0 + std::exp(-z));
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

inline double bce(double logit, double target) {
  const double p = clamped_sigmoid(logit);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

/// ceil(percent / 100 * n), at least 1.
inline std::size_t topk_count(std::size_t n, double topk_percent) {
  const double k = std::ceil(topk_percent * static_cast<double>(n) / 100.0 - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 1.0)), 1, n);
}

/// Indices of the k largest values, ascending. Ties at the threshold go to the lowest indices.
std::vector<std::size_t> topk_select(std::span<const double> values, std::size_t k);

/// Mean BCE of the hardest `topk_percent` of all voxel-channel entries of one patch.
/// Logits are pre-sigmoid; probabilities are clamped to [1e-7, 1 - 1e-7]. If `grad` is
/// non-empty it receives d(loss)/d(logit) (zero outside the selection and where clamped).
template <class T>
double bce_topk_loss(std::span<const T> logits, std::span<const float> target, double topk_percent,
                     std::span<T> grad = {}) {
  if (logits.size() != target.size()) throw ContractError("logits and target differ in size");
  if (!grad.empty() && grad.size() != logits.size()) throw ContractError("gradient buffer size mismatch");
  if (!(topk_percent > 0.0 && topk_percent <= 100.0)) throw ContractError("topk_percent must lie in (0, 100]");
  if (logits.empty()) throw ContractError("empty patch");
  const std::size_t n = logits.size();
  std::vector<double> losses(n);
  for (std::size_t i = 0; i < n; ++i) losses[i] = bce(static_cast<double>(logits[i]), target[i]);
  const std::size_t k = topk_count(n, topk_percent);

  double sum = 0.0;
  if (k == n) {
    for (double l : losses) sum += l;
    if (!grad.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
        const bool clamped = p <= kProbEpsilon || p >= 1.0 - kProbEpsilon;
        grad[i] = clamped ? T(0) : static_cast<T>((p - target[i]) / static_cast<double>(n));
      }
    }
    return sum / static_cast<double>(n);
  }
  const std::vector<std::size_t> sel = topk_select(losses, k);
  for (std::size_t i : sel) sum += losses[i];
  if (!grad.empty()) {
    std::fill(grad.begin(), grad.end(), T(0));
    for (std::size_t i : sel) {
      const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
      const bool clamped = p <= kProbEpsilon || p >= 1.0 - kProbEpsilon;
      grad[i] = clamped ? T(0) : static_cast<T>((p - target[i]) / static_cast<double>(k));
    }
  }
  return sum / static_cast<double>(k);
}

/// Mean of (sigmoid(logit) - target)^2 over the patch.
template <class T>
double mse_loss(std::span<const T> logits, std::span<const float> target, std::span<T> grad = {}) {
  if (logits.size() != target.size()) throw ContractError("logits and target differ in size");
  if (!grad.empty() && grad.size() != logits.size()) throw ContractError("gradient buffer size mismatch");
  if (logits.empty()) throw ContractError("empty patch");
  const double n = static_cast<double>(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
    const double d = p - target[i];
    sum += d * d;
    if (!grad.empty()) grad[i] = static_cast<T>(2.0 * d * p * (1.0 - p) / n);
  }
  return sum / n;
}

}  // namespace nnlm
