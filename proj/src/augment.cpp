#include "nnlm/augment.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

#include "nnlm/resample.hpp"

namespace nnlm {
namespace {

template <class T>
void mirror_buffer(std::vector<T>& buf, const Dims& d, int axis) {
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        int ri = i, rj = j, rk = k;
        if (axis == 0) ri = d.x - 1 - i;
        if (axis == 1) rj = d.y - 1 - j;
        if (axis == 2) rk = d.z - 1 - k;
        const std::size_t a = d.index(i, j, k), b = d.index(ri, rj, rk);
        if (a < b) std::swap(buf[a], buf[b]);
      }
}

void spatial_transform(Patch& p, const Mat3& inverse) {
  const Dims& d = p.dims;
  const Vec3 center((d.x - 1) / 2.0, (d.y - 1) / 2.0, (d.z - 1) / 2.0);
  Geometry g;
  g.dims = d;
  const Volume3D src_img(g, p.image);
  const std::vector<std::uint16_t> src_lab = p.labels;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i) {
        const Vec3 s = center + inverse * (Vec3(i, j, k) - center);
        const std::size_t o = d.index(i, j, k);
        const bool inside = s[0] >= -0.5 && s[1] >= -0.5 && s[2] >= -0.5 && s[0] <= d.x - 0.5 &&
                            s[1] <= d.y - 0.5 && s[2] <= d.z - 0.5;
        if (!inside) {
          p.image[o] = 0.0f;
          p.labels[o] = 0;
          continue;
        }
        p.image[o] = sample_linear(src_img, s);
        const int ni = std::clamp(static_cast<int>(std::floor(s[0] + 0.5)), 0, d.x - 1);
        const int nj = std::clamp(static_cast<int>(std::floor(s[1] + 0.5)), 0, d.y - 1);
        const int nk = std::clamp(static_cast<int>(std::floor(s[2] + 0.5)), 0, d.z - 1);
        p.labels[o] = src_lab[d.index(ni, nj, nk)];
      }
    }
  }
}

}  // namespace

void mirror_axis(Patch& patch, int axis) {
  mirror_buffer(patch.image, patch.dims, axis);
  mirror_buffer(patch.labels, patch.dims, axis);
}

void augment(Patch& patch, const AugmentConfig& cfg, Rng& rng) {
  // Draw every random number in a fixed order so the stream does not depend on outcomes.
  const bool rotate = uniform(rng) < cfg.p_rotation;
  const double max_rad = cfg.max_rotation_deg * std::numbers::pi / 180.0;
  const double ax = uniform(rng, -max_rad, max_rad);
  const double ay = uniform(rng, -max_rad, max_rad);
  const double az = uniform(rng, -max_rad, max_rad);
  const bool scale = uniform(rng) < cfg.p_scale;
  const double factor = uniform(rng, cfg.scale_lo, cfg.scale_hi);
  std::array<bool, 3> mirror{};
  for (auto& m : mirror) m = uniform(rng) < cfg.p_mirror;
  const bool noise = uniform(rng) < cfg.p_noise;
  const double sigma = uniform(rng, 0.0, cfg.noise_sigma_max);
  const bool bright = uniform(rng) < cfg.p_brightness;
  const double gain = uniform(rng, cfg.brightness_lo, cfg.brightness_hi);

  if (rotate || scale) {
    Mat3 forward = Mat3::Identity();
    if (rotate) {
      forward = (Eigen::AngleAxisd(ax, Vec3::UnitX()) * Eigen::AngleAxisd(ay, Vec3::UnitY()) *
                 Eigen::AngleAxisd(az, Vec3::UnitZ()))
                    .toRotationMatrix();
    }
    if (scale) forward *= factor;
    spatial_transform(patch, forward.inverse());
  }
  for (int a = 0; a < 3; ++a) {
    if (mirror[a]) mirror_axis(patch, a);
  }
  if (noise && sigma > 0.0) {
    for (auto& v : patch.image) v += static_cast<float>(sigma * normal(rng));
  }
  if (bright) {
    for (auto& v : patch.image) v *= static_cast<float>(gain);
  }
}

}  // namespace nnlm
