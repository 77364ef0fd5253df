#include "nnlm/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "nnlm/error.hpp"

namespace nnlm {

void paint_edt(std::span<float> channel, const Dims& dims, const Vec3& center, int radius) {
  if (channel.size() != dims.count()) throw ContractError("heatmap channel size does not match dims");
  std::array<int, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::floor(center[a] - radius)));
    hi[a] = std::min(dims[a] - 1, static_cast<int>(std::ceil(center[a] + radius)));
  }
  for (int k = lo[2]; k <= hi[2]; ++k) {
    const double dz = k - center[2];
    for (int j = lo[1]; j <= hi[1]; ++j) {
      const double dy = j - center[1];
      for (int i = lo[0]; i <= hi[0]; ++i) {
        const double dx = i - center[0];
        const double v = edt_profile(std::sqrt(dx * dx + dy * dy + dz * dz), radius);
        if (v <= 0.0) continue;
        float& dst = channel[dims.index(i, j, k)];
        dst = std::max(dst, static_cast<float>(v));
      }
    }
  }
}

HeatmapTarget patch_to_heatmap(std::span<const std::uint16_t> label_patch, const Dims& dims, int class_count,
                               int radius) {
  if (label_patch.size() != dims.count()) throw ContractError("label patch size does not match dims");
  if (radius < 1) throw ContractError("heatmap radius must be >= 1");
  if (class_count < 1) throw ContractError("class count must be >= 1");

  std::vector<double> sx(class_count + 1, 0.0), sy(class_count + 1, 0.0), sz(class_count + 1, 0.0);
  std::vector<std::size_t> n(class_count + 1, 0);
  std::size_t idx = 0;
  for (int k = 0; k < dims.z; ++k) {
    for (int j = 0; j < dims.y; ++j) {
      for (int i = 0; i < dims.x; ++i, ++idx) {
        const std::uint16_t v = label_patch[idx];
        if (v == 0) continue;
        if (v > class_count) throw ContractError("label value " + std::to_string(v) + " exceeds class count");
        sx[v] += i;
        sy[v] += j;
        sz[v] += k;
        ++n[v];
      }
    }
  }

  HeatmapTarget out;
  out.dims = dims;
  out.radius_voxels = radius;
  out.channels.assign(static_cast<std::size_t>(class_count) * dims.count(), 0.0f);
  out.centers.resize(class_count);
  for (int c = 0; c < class_count; ++c) {
    const std::size_t cnt = n[c + 1];
    if (cnt == 0) continue;
    const double m = static_cast<double>(cnt);
    out.centers[c] = Vec3(sx[c + 1] / m, sy[c + 1] / m, sz[c + 1] / m);
  }
#pragma omp parallel for schedule(static)
  for (int c = 0; c < class_count; ++c) {
    if (!out.centers[c]) continue;
    auto ch = std::span<float>(out.channels).subspan(static_cast<std::size_t>(c) * dims.count(), dims.count());
    paint_edt(ch, dims, *out.centers[c], radius);
  }
  return out;
}

}  // namespace nnlm
