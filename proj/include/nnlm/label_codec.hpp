#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nnlm/geometry.hpp"
#include "nnlm/landmarks.hpp"

namespace nnlm {

/// Landmarks stored as small labelled cubes in an integer volume; 0 is background.
struct LabelMap {
  LabelVolume volume;
  /// (landmark name, label value) pairs; values are positive and distinct.
  std::vector<std::pair<std::string, std::uint16_t>> label_values;
  /// Landmarks whose cube was cut by the grid border.
  std::vector<std::string> clipped;

  [[nodiscard]] std::optional<std::uint16_t> value_of(const std::string& name) const;
  /// Throws ValidationError if an unmapped value is present or a label region is not one 26-connected component.
  void validate() const;
};

/// Paints a (2r+1)^3 cube of value index+1 around round(world_to_voxel(p)) for each landmark.
/// Label values follow `classes` when given, otherwise the landmark order.
/// Throws EncodingError for landmarks off the grid and ValidationError for overlapping cubes.
LabelMap encode_label_map(const Geometry& geometry, const LandmarkSet& lm, int cube_radius = 1,
                          std::span<const std::string> classes = {});

struct DecodedLandmarks {
  LandmarkSet landmarks;
  /// Mapped landmarks without a single foreground voxel.
  std::vector<std::string> missing;
};

/// Unweighted centroid of each label region, converted to world mm.
DecodedLandmarks decode_label_centroids(const LabelMap& lmap, const Geometry& geometry);

/// Number of 26-connected components of voxels equal to `value`.
int count_components(std::span<const std::uint16_t> labels, const Dims& dims, std::uint16_t value);

/// Largest per-axis |rounded index difference| between two voxels.
int chebyshev(const std::array<int, 3>& a, const std::array<int, 3>& b);

}  // namespace nnlm
