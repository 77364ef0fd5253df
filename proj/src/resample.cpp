#include "nnlm/resample.hpp"

#include <algorithm>
#include <cmath>

namespace nnlm {
namespace {

struct AxisTap {
  int lo = 0, hi = 0;
  double w_hi = 0.0;
};

AxisTap linear_tap(double pos, int n) {
  pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
  const int lo = static_cast<int>(std::floor(pos));
  const int hi = std::min(lo + 1, n - 1);
  return {lo, hi, pos - lo};
}

int nearest_tap(double pos, int n) {
  return std::clamp(static_cast<int>(std::floor(pos + 0.5)), 0, n - 1);
}

template <class T>
double trilinear(const T* in, const Dims& d, const AxisTap& tx, const AxisTap& ty, const AxisTap& tz) {
  // a + t * (b - a) keeps constant neighbourhoods exact.
  const auto at = [&](int i, int j, int k) { return static_cast<double>(in[d.index(i, j, k)]); };
  const auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
  const double c00 = lerp(at(tx.lo, ty.lo, tz.lo), at(tx.hi, ty.lo, tz.lo), tx.w_hi);
  const double c10 = lerp(at(tx.lo, ty.hi, tz.lo), at(tx.hi, ty.hi, tz.lo), tx.w_hi);
  const double c01 = lerp(at(tx.lo, ty.lo, tz.hi), at(tx.hi, ty.lo, tz.hi), tx.w_hi);
  const double c11 = lerp(at(tx.lo, ty.hi, tz.hi), at(tx.hi, ty.hi, tz.hi), tx.w_hi);
  return lerp(lerp(c00, c10, ty.w_hi), lerp(c01, c11, ty.w_hi), tz.w_hi);
}

}  // namespace

float sample_linear(const Volume3D& v, const Vec3& idx) {
  const Dims& d = v.dims();
  return static_cast<float>(
      trilinear(v.storage().data(), d, linear_tap(idx[0], d.x), linear_tap(idx[1], d.y), linear_tap(idx[2], d.z)));
}

template <class T>
Volume<T> resample_volume(const Volume<T>& v, const Vec3& target_spacing, Interpolation mode) {
  for (int a = 0; a < 3; ++a) {
    if (!(target_spacing[a] > 0.0) || !std::isfinite(target_spacing[a]))
      throw ConfigError("target spacing must be strictly positive");
  }
  const Geometry& src = v.geometry();
  if ((src.spacing - target_spacing).cwiseAbs().maxCoeff() == 0.0) return v;

  Volume<T> out(src.with_spacing(target_spacing));
  const Dims od = out.dims();
  const Dims sd = src.dims;
  const Vec3 scale = target_spacing.cwiseQuotient(src.spacing);

  // Separable taps: precompute per-axis source positions once.
  std::array<std::vector<AxisTap>, 3> lin;
  std::array<std::vector<int>, 3> near;
  for (int a = 0; a < 3; ++a) {
    lin[a].resize(od[a]);
    near[a].resize(od[a]);
    for (int j = 0; j < od[a]; ++j) {
      const double pos = j * scale[a];
      lin[a][j] = linear_tap(pos, sd[a]);
      near[a][j] = nearest_tap(pos, sd[a]);
    }
  }

  const auto& in = v.storage();
  auto& dst = out.storage();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < od.z; ++k) {
    for (int j = 0; j < od.y; ++j) {
      for (int i = 0; i < od.x; ++i) {
        const std::size_t o = od.index(i, j, k);
        if (mode == Interpolation::nearest) {
          dst[o] = in[sd.index(near[0][i], near[1][j], near[2][k])];
          continue;
        }
        const double acc = trilinear(in.data(), sd, lin[0][i], lin[1][j], lin[2][k]);
        if constexpr (std::is_integral_v<T>) {
          dst[o] = static_cast<T>(std::lround(acc));
        } else {
          dst[o] = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

template Volume<float> resample_volume(const Volume<float>&, const Vec3&, Interpolation);
template Volume<std::uint16_t> resample_volume(const Volume<std::uint16_t>&, const Vec3&, Interpolation);

}  // namespace nnlm
