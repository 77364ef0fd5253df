#pragma once

#include "nnlm/geometry.hpp"

namespace nnlm {

enum class Interpolation { linear, nearest };

/// Resamples onto a grid with the same origin and direction and the requested spacing.
/// Output shape is round(shape * spacing / target), at least 1 per axis. Samples that
/// fall outside the source grid are clamped to the nearest edge voxel.
template <class T>
Volume<T> resample_volume(const Volume<T>& v, const Vec3& target_spacing, Interpolation mode);

/// Samples a volume at a continuous voxel position with edge clamping.
float sample_linear(const Volume3D& v, const Vec3& idx);

extern template Volume<float> resample_volume(const Volume<float>&, const Vec3&, Interpolation);
extern template Volume<std::uint16_t> resample_volume(const Volume<std::uint16_t>&, const Vec3&, Interpolation);

}  // namespace nnlm
