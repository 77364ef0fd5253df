#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nnlm/plan.hpp"
#include "nnlm/preprocess.hpp"
#include "nnlm/rng.hpp"

namespace nnlm {

/// Image and label patch of identical extent, cut from one preprocessed case.
struct Patch {
  Dims dims;
  std::vector<float> image;
  std::vector<std::uint16_t> labels;
  /// Position of voxel (0,0,0) of the patch in the source grid (may be negative).
  std::array<int, 3> corner{0, 0, 0};
};

/// A preprocessed case plus its foreground voxel list, built once per training run.
struct TrainingCase {
  PreprocessedCase data;
  std::vector<std::array<int, 3>> foreground;

  explicit TrainingCase(PreprocessedCase c);
};

/// Copies a patch whose voxel (0,0,0) sits at `corner`; voxels outside the case are zero.
Patch extract_patch(const PreprocessedCase& c, const std::array<int, 3>& corner, const Dims& dims);

/// With probability `oversample_foreground_fraction` the patch is centred on a uniformly
/// chosen label-cube voxel; otherwise its placement is uniform over positions that keep it
/// inside the volume (centred along axes shorter than the patch).
Patch sample_patch(const TrainingCase& c, const Plan& plan, Rng& rng);

}  // namespace nnlm
