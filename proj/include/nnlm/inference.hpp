#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nnlm/landmarks.hpp"
#include "nnlm/plan.hpp"
#include "nnlm/tensor.hpp"
#include "nnlm/unet.hpp"

namespace nnlm {

/// C-channel volume on one grid, channel-major, each channel x-fastest.
struct HeatmapVolume {
  Geometry geometry;
  int channels = 0;
  std::vector<float> data;

  [[nodiscard]] std::span<const float> channel(int c) const {
    const std::size_t n = geometry.dims.count();
    return std::span<const float>(data).subspan(static_cast<std::size_t>(c) * n, n);
  }
  [[nodiscard]] std::span<float> channel(int c) {
    const std::size_t n = geometry.dims.count();
    return std::span<float>(data).subspan(static_cast<std::size_t>(c) * n, n);
  }
};

/// Maps a 1 x 1 x patch input to 1 x C x patch probabilities in [0, 1].
using PatchPredictor = std::function<void(const Tensor& input, Tensor& probabilities)>;

/// Wraps a network: forward pass followed by a sigmoid.
PatchPredictor make_predictor(UNet& net);

struct SlidingWindowOptions {
  double overlap = 0.5;
  double sigma_scale = 1.0 / 8.0;
};

/// Tile start offsets along one axis: step = ceil(patch * (1 - overlap)), last tile snapped inside.
std::vector<int> tile_starts(int extent, int patch, double overlap);

/// Separable Gaussian importance map, sigma = patch * sigma_scale, centred at (patch - 1) / 2.
std::vector<float> gaussian_importance(const Dims& patch, double sigma_scale);

HeatmapVolume sliding_window_predict(const PatchPredictor& model, const Volume3D& image, const Dims& patch,
                                     int channels, const SlidingWindowOptions& opt = {});
HeatmapVolume sliding_window_predict(const PatchPredictor& model, const Volume3D& image, const Plan& plan,
                                     const SlidingWindowOptions& opt = {});

/// Per-channel argmax (lowest linear index wins ties) mapped to world mm. Always returns
/// every class; confidence is the heatmap value at the argmax.
LandmarkSet extract_landmarks(const HeatmapVolume& heatmap, std::span<const std::string> classes,
                              const std::string& case_id = {});

}  // namespace nnlm
