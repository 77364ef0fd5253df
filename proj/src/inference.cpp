#include "nnlm/inference.hpp"

#include <algorithm>
#include <cmath>

#include "nnlm/error.hpp"

namespace nnlm {

PatchPredictor make_predictor(UNet& net) {
  return [&net](const Tensor& input, Tensor& probs) {
    const Tensor& logits = net.forward(input);
    probs.reshape(logits.shape());
    const auto src = logits.data();
    auto dst = probs.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(src[i]))));
  };
}

std::vector<int> tile_starts(int extent, int patch, double overlap) {
  if (extent <= patch) return {0};
  const int step = std::max(1, static_cast<int>(std::ceil(patch * (1.0 - overlap) - 1e-9)));
  std::vector<int> starts;
  for (int s = 0;; s += step) {
    if (s + patch >= extent) {
      starts.push_back(extent - patch);
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

std::vector<float> gaussian_importance(const Dims& patch, double sigma_scale) {
  std::array<std::vector<double>, 3> axis;
  for (int a = 0; a < 3; ++a) {
    const int n = patch[a];
    const double sigma = n * sigma_scale;
    const double c = (n - 1) / 2.0;
    axis[a].resize(n);
    for (int i = 0; i < n; ++i) axis[a][i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
  }
  std::vector<float> w(patch.count());
  double peak = 0.0;
  for (int k = 0; k < patch.z; ++k)
    for (int j = 0; j < patch.y; ++j)
      for (int i = 0; i < patch.x; ++i) peak = std::max(peak, axis[0][i] * axis[1][j] * axis[2][k]);
  // Normalise to peak 1 and keep a floor so edge voxels covered by a single tile stay defined.
  const float floor = 1e-6f;
  for (int k = 0; k < patch.z; ++k)
    for (int j = 0; j < patch.y; ++j)
      for (int i = 0; i < patch.x; ++i)
        w[patch.index(i, j, k)] = std::max(floor, static_cast<float>(axis[0][i] * axis[1][j] * axis[2][k] / peak));
  return w;
}

HeatmapVolume sliding_window_predict(const PatchPredictor& model, const Volume3D& image, const Dims& patch,
                                     int channels, const SlidingWindowOptions& opt) {
  if (channels < 1) throw ContractError("sliding window needs at least one channel");
  const Dims& src = image.dims();
  // Images smaller than the patch are zero-padded (centred) to the patch extent, then cropped back.
  Dims padded = src;
  std::array<int, 3> offset{};
  for (int a = 0; a < 3; ++a) {
    if (src[a] < patch[a]) {
      padded[a] = patch[a];
      offset[a] = (patch[a] - src[a]) / 2;
    }
  }
  std::vector<float> canvas(padded.count(), 0.0f);
  for (int k = 0; k < src.z; ++k)
    for (int j = 0; j < src.y; ++j)
      for (int i = 0; i < src.x; ++i)
        canvas[padded.index(i + offset[0], j + offset[1], k + offset[2])] = image.at(i, j, k);

  const std::vector<float> weight = gaussian_importance(patch, opt.sigma_scale);
  std::vector<double> acc(static_cast<std::size_t>(channels) * padded.count(), 0.0);
  std::vector<double> wsum(padded.count(), 0.0);
  const auto xs = tile_starts(padded.x, patch.x, opt.overlap);
  const auto ys = tile_starts(padded.y, patch.y, opt.overlap);
  const auto zs = tile_starts(padded.z, patch.z, opt.overlap);

  Tensor input(Shape{1, 1, patch});
  Tensor probs;
  // Tiles are visited in a fixed order, so the accumulation order never changes.
  for (int z0 : zs) {
    for (int y0 : ys) {
      for (int x0 : xs) {
        float* in = input.ptr();
        for (int k = 0; k < patch.z; ++k)
          for (int j = 0; j < patch.y; ++j)
            std::copy_n(canvas.data() + padded.index(x0, y0 + j, z0 + k), patch.x, in + patch.index(0, j, k));
        model(input, probs);
        if (probs.shape().c != channels || probs.shape().dims != patch)
          throw ContractError("model output does not match channels x patch");
#pragma omp parallel for schedule(static)
        for (int c = 0; c < channels; ++c) {
          const float* p = probs.channel(0, c);
          double* dst = acc.data() + static_cast<std::size_t>(c) * padded.count();
          for (int k = 0; k < patch.z; ++k)
            for (int j = 0; j < patch.y; ++j)
              for (int i = 0; i < patch.x; ++i) {
                const std::size_t t = patch.index(i, j, k);
                dst[padded.index(x0 + i, y0 + j, z0 + k)] += static_cast<double>(weight[t]) * p[t];
              }
        }
        for (int k = 0; k < patch.z; ++k)
          for (int j = 0; j < patch.y; ++j)
            for (int i = 0; i < patch.x; ++i)
              wsum[padded.index(x0 + i, y0 + j, z0 + k)] += weight[patch.index(i, j, k)];
      }
    }
  }

  HeatmapVolume out;
  out.geometry = image.geometry();
  out.channels = channels;
  out.data.resize(static_cast<std::size_t>(channels) * src.count());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const double* a = acc.data() + static_cast<std::size_t>(c) * padded.count();
    float* dst = out.data.data() + static_cast<std::size_t>(c) * src.count();
    for (int k = 0; k < src.z; ++k)
      for (int j = 0; j < src.y; ++j)
        for (int i = 0; i < src.x; ++i) {
          const std::size_t q = padded.index(i + offset[0], j + offset[1], k + offset[2]);
          dst[src.index(i, j, k)] = static_cast<float>(std::clamp(a[q] / wsum[q], 0.0, 1.0));
        }
  }
  return out;
}

HeatmapVolume sliding_window_predict(const PatchPredictor& model, const Volume3D& image, const Plan& plan,
                                     const SlidingWindowOptions& opt) {
  return sliding_window_predict(model, image, Dims{plan.patch_size[0], plan.patch_size[1], plan.patch_size[2]},
                                plan.class_count(), opt);
}

LandmarkSet extract_landmarks(const HeatmapVolume& heatmap, std::span<const std::string> classes,
                              const std::string& case_id) {
  if (static_cast<int>(classes.size()) != heatmap.channels)
    throw ContractError("class list does not match heatmap channel count");
  LandmarkSet out;
  out.case_id = case_id;
  const Dims& d = heatmap.geometry.dims;
  for (int c = 0; c < heatmap.channels; ++c) {
    const auto ch = heatmap.channel(c);
    // max_element returns the first maximum, i.e. the lowest x-fastest index.
    const std::size_t best = static_cast<std::size_t>(std::max_element(ch.begin(), ch.end()) - ch.begin());
    const int i = static_cast<int>(best % d.x);
    const int j = static_cast<int>((best / d.x) % d.y);
    const int k = static_cast<int>(best / (static_cast<std::size_t>(d.x) * d.y));
    out.add(classes[c], heatmap.geometry.voxel_to_world(Vec3(i, j, k)));
    out.confidence.push_back(ch[best]);
  }
  return out;
}

}  // namespace nnlm
