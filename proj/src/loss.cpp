#include "nnlm/loss.hpp"

namespace nnlm {

std::vector<std::size_t> topk_select(std::span<const double> values, std::size_t k) {
  const std::size_t n = values.size();
  if (k == 0) return {};
  if (k >= n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  std::vector<double> scratch(values.begin(), values.end());
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end(),
                   std::greater<>());
  const double threshold = scratch[k - 1];
  std::size_t above = 0;
  for (double v : values) above += v > threshold;
  std::size_t ties_left = k - above;
  std::vector<std::size_t> sel;
  sel.reserve(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] > threshold) {
      sel.push_back(i);
    } else if (values[i] == threshold && ties_left > 0) {
      sel.push_back(i);
      --ties_left;
    }
  }
  return sel;
}

}  // namespace nnlm
