#include "nnlm/label_codec.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "nnlm/log.hpp"

namespace nnlm {

std::optional<std::uint16_t> LabelMap::value_of(const std::string& name) const {
  for (const auto& [n, v] : label_values) {
    if (n == name) return v;
  }
  return std::nullopt;
}

void LabelMap::validate() const {
  std::vector<bool> known(65536, false);
  for (const auto& [n, v] : label_values) {
    if (v == 0) throw ValidationError("label value 0 is reserved for background");
    known[v] = true;
  }
  std::vector<bool> present(65536, false);
  for (std::uint16_t v : volume.storage()) {
    if (v != 0 && !known[v]) throw ValidationError("label value " + std::to_string(v) + " has no landmark");
    present[v] = true;
  }
  for (const auto& [n, v] : label_values) {
    if (present[v] && count_components(volume.data(), volume.dims(), v) != 1)
      throw ValidationError("label region of " + n + " is not a single connected component");
  }
}

int chebyshev(const std::array<int, 3>& a, const std::array<int, 3>& b) {
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

LabelMap encode_label_map(const Geometry& geometry, const LandmarkSet& lm, int cube_radius,
                          std::span<const std::string> classes) {
  if (cube_radius < 0) throw EncodingError("cube radius must be >= 0");
  LabelMap out{LabelVolume(geometry, 0), {}, {}};
  const Dims& d = geometry.dims;

  std::vector<std::array<int, 3>> centers;
  for (std::size_t i = 0; i < lm.size(); ++i) {
    std::uint16_t value;
    if (classes.empty()) {
      value = static_cast<std::uint16_t>(i + 1);
    } else {
      const auto it = std::find(classes.begin(), classes.end(), lm.names[i]);
      if (it == classes.end()) throw EncodingError("landmark " + lm.names[i] + " is not a declared class");
      value = static_cast<std::uint16_t>(it - classes.begin() + 1);
    }
    if (!lm.positions_mm[i].allFinite()) throw EncodingError("non-finite position for landmark " + lm.names[i]);
    const auto c = round_voxel(geometry.world_to_voxel(lm.positions_mm[i]));
    if (!d.contains(c[0], c[1], c[2]))
      throw EncodingError("landmark " + lm.names[i] + " of case " + lm.case_id + " lies outside the grid");
    for (std::size_t j = 0; j < centers.size(); ++j) {
      if (chebyshev(c, centers[j]) < 2 * cube_radius + 1)
        throw ValidationError("landmarks " + lm.names[j] + " and " + lm.names[i] + " of case " + lm.case_id +
                              " are closer than " + std::to_string(2 * cube_radius + 1) + " voxels");
    }
    centers.push_back(c);
    out.label_values.emplace_back(lm.names[i], value);

    bool clipped = false;
    for (int k = c[2] - cube_radius; k <= c[2] + cube_radius; ++k) {
      for (int j = c[1] - cube_radius; j <= c[1] + cube_radius; ++j) {
        for (int ii = c[0] - cube_radius; ii <= c[0] + cube_radius; ++ii) {
          if (!d.contains(ii, j, k)) {
            clipped = true;
            continue;
          }
          out.volume.at(ii, j, k) = value;
        }
      }
    }
    if (clipped) {
      out.clipped.push_back(lm.names[i]);
      log_warn("label cube of " + lm.names[i] + " in case " + lm.case_id + " is clipped by the grid border");
    }
  }
  return out;
}

DecodedLandmarks decode_label_centroids(const LabelMap& lmap, const Geometry& geometry) {
  struct Acc {
    double x = 0, y = 0, z = 0;
    std::size_t n = 0;
  };
  std::vector<Acc> acc(65536);
  const Dims& d = lmap.volume.dims();
  const auto& data = lmap.volume.storage();
  std::size_t idx = 0;
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i, ++idx) {
        const std::uint16_t v = data[idx];
        if (v == 0) continue;
        Acc& a = acc[v];
        a.x += i;
        a.y += j;
        a.z += k;
        ++a.n;
      }
    }
  }
  DecodedLandmarks out;
  for (const auto& [name, v] : lmap.label_values) {
    const Acc& a = acc[v];
    if (a.n == 0) {
      out.missing.push_back(name);
      continue;
    }
    const double n = static_cast<double>(a.n);
    out.landmarks.add(name, geometry.voxel_to_world(Vec3(a.x / n, a.y / n, a.z / n)));
  }
  return out;
}

int count_components(std::span<const std::uint16_t> labels, const Dims& dims, std::uint16_t value) {
  std::vector<char> seen(labels.size(), 0);
  int components = 0;
  std::queue<std::array<int, 3>> q;
  std::size_t idx = 0;
  for (int k = 0; k < dims.z; ++k) {
    for (int j = 0; j < dims.y; ++j) {
      for (int i = 0; i < dims.x; ++i, ++idx) {
        if (labels[idx] != value || seen[idx]) continue;
        ++components;
        seen[idx] = 1;
        q.push({i, j, k});
        while (!q.empty()) {
          const auto [x, y, z] = q.front();
          q.pop();
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int nx = x + dx, ny = y + dy, nz = z + dz;
                if (!dims.contains(nx, ny, nz)) continue;
                const std::size_t n = dims.index(nx, ny, nz);
                if (labels[n] == value && !seen[n]) {
                  seen[n] = 1;
                  q.push({nx, ny, nz});
                }
              }
        }
      }
    }
  }
  return components;
}

}  // namespace nnlm
