#include "nnlm/sampling.hpp"

#include <algorithm>

namespace nnlm {

TrainingCase::TrainingCase(PreprocessedCase c) : data(std::move(c)) {
  const Dims& d = data.labels.volume.dims();
  const auto& lab = data.labels.volume.storage();
  std::size_t idx = 0;
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i, ++idx)
        if (lab[idx] != 0) foreground.push_back({i, j, k});
}

Patch extract_patch(const PreprocessedCase& c, const std::array<int, 3>& corner, const Dims& dims) {
  Patch p;
  p.dims = dims;
  p.corner = corner;
  p.image.assign(dims.count(), 0.0f);
  p.labels.assign(dims.count(), 0);
  const Dims& src = c.image.dims();
  const auto& img = c.image.storage();
  const auto& lab = c.labels.volume.storage();
  const bool has_labels = lab.size() == img.size();
  const int x0 = std::max(0, -corner[0]), x1 = std::min(dims.x, src.x - corner[0]);
  for (int k = 0; k < dims.z; ++k) {
    const int sk = k + corner[2];
    if (sk < 0 || sk >= src.z) continue;
    for (int j = 0; j < dims.y; ++j) {
      const int sj = j + corner[1];
      if (sj < 0 || sj >= src.y || x1 <= x0) continue;
      const std::size_t s = src.index(x0 + corner[0], sj, sk);
      const std::size_t d = dims.index(x0, j, k);
      std::copy(img.begin() + s, img.begin() + s + (x1 - x0), p.image.begin() + d);
      if (has_labels) std::copy(lab.begin() + s, lab.begin() + s + (x1 - x0), p.labels.begin() + d);
    }
  }
  return p;
}

Patch sample_patch(const TrainingCase& c, const Plan& plan, Rng& rng) {
  const Dims patch{plan.patch_size[0], plan.patch_size[1], plan.patch_size[2]};
  const Dims& src = c.data.image.dims();
  std::array<int, 3> corner{};
  const bool foreground = !c.foreground.empty() && uniform(rng) < plan.oversample_foreground_fraction;
  if (foreground) {
    const auto& v = c.foreground[uniform_index(rng, c.foreground.size())];
    for (int a = 0; a < 3; ++a) corner[a] = v[a] - patch[a] / 2;
  } else {
    for (int a = 0; a < 3; ++a) {
      const int slack = src[a] - patch[a];
      corner[a] = slack >= 0 ? static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(slack) + 1)) : slack / 2;
    }
  }
  return extract_patch(c.data, corner, patch);
}

}  // namespace nnlm
