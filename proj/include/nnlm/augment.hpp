#pragma once

#include "nnlm/rng.hpp"
#include "nnlm/sampling.hpp"

namespace nnlm {

struct AugmentConfig {
  double p_mirror = 0.5;  // per axis
  double p_rotation = 0.2;
  double max_rotation_deg = 30.0;
  double p_scale = 0.2;
  double scale_lo = 0.7;
  double scale_hi = 1.4;
  double p_noise = 0.15;
  double noise_sigma_max = 0.1;
  double p_brightness = 0.15;
  double brightness_lo = 0.8;
  double brightness_hi = 1.2;

  static AugmentConfig none() { return {0, 0, 30.0, 0, 0.7, 1.4, 0, 0.1, 0, 0.8, 1.2}; }
};

/// Applies one random spatial transform to image (linear) and labels (nearest) about the
/// patch centre, then per-axis mirroring, then image-only noise and brightness.
/// Runs on label patches, before any heatmap conversion.
void augment(Patch& patch, const AugmentConfig& cfg, Rng& rng);

/// Reflects a patch along one axis: index i becomes n - 1 - i.
void mirror_axis(Patch& patch, int axis);

}  // namespace nnlm
