#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nnlm/geometry.hpp"
#include "nnlm/landmarks.hpp"
#include "nnlm/rng.hpp"

namespace nnlm {

struct SynthOptions {
  int cases = 40;
  /// The last `test_cases` of the generated cases go to imagesTs/landmarksTs.
  int test_cases = 0;
  Dims shape{64, 64, 64};
  int class_count = 4;
  std::uint64_t seed = 0;
  /// Additive Gaussian noise std relative to the phantom body intensity.
  double noise = 0.1;
  Vec3 spacing = Vec3::Ones();
  double max_rotation_deg = 15.0;
  double scale_jitter = 0.1;
  double max_shift_voxels = 4.0;
  std::string name = "synthetic";
};

struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  double scale = 1.0;
  Vec3 shift = Vec3::Zero();  // voxels
};

struct SynthCase {
  Volume3D image;
  LandmarkSet landmarks;
};

inline constexpr double kPhantomIntensity = 100.0;

/// Landmark offsets (voxels) from the volume centre before the similarity transform.
/// Throws ConfigError when they break the separation rule or leave the grid.
std::vector<Vec3> synth_template(const Dims& shape, int class_count);

SimilarityTransform draw_transform(const SynthOptions& opt, Rng& rng);

/// Renders one case. `noise_rng` may be null for a noise-free volume.
SynthCase synth_render(const SynthOptions& opt, const SimilarityTransform& t, Rng* noise_rng,
                       const std::string& case_id);

/// Writes a complete dataset directory (dataset.json, imagesTr, landmarksTr, imagesTs, landmarksTs).
void synth_generate(const SynthOptions& opt, const std::filesystem::path& out_dir);

}  // namespace nnlm
