#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nnlm/geometry.hpp"

namespace nnlm {

/// Per-landmark regression targets in [0, 1], channel-major, each channel x-fastest.
struct HeatmapTarget {
  Dims dims;
  int radius_voxels = 15;
  std::vector<float> channels;
  /// Continuous voxel centre per channel; empty when the landmark is absent from the patch.
  std::vector<std::optional<Vec3>> centers;

  [[nodiscard]] int channel_count() const { return static_cast<int>(centers.size()); }
  [[nodiscard]] std::span<const float> channel(int c) const {
    return std::span<const float>(channels).subspan(static_cast<std::size_t>(c) * dims.count(), dims.count());
  }
};

/// Linear distance profile: 1 at the centre, falling to 0 at `radius` and beyond.
inline double edt_profile(double distance, int radius) {
  const double r = static_cast<double>(radius);
  return distance >= r ? 0.0 : (r - distance) / r;
}

/// Writes max(existing, profile) around `center` into one channel.
void paint_edt(std::span<float> channel, const Dims& dims, const Vec3& center, int radius);

/// Converts a multi-label patch into heatmap targets: the centroid of label c + 1 becomes
/// the centre of channel c. Labels missing from the patch give all-zero channels.
HeatmapTarget patch_to_heatmap(std::span<const std::uint16_t> label_patch, const Dims& dims, int class_count,
                               int radius);

}  // namespace nnlm
