#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nnlm/error.hpp"

namespace nnlm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Integer grid extent, x fastest in memory.
struct Dims {
  int x = 1, y = 1, z = 1;

  [[nodiscard]] std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  [[nodiscard]] int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  int& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(x) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(y) * k);
  }
  [[nodiscard]] bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < x && j < y && k < z;
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Voxel grid placed in world space (mm). Voxel index (0,0,0) sits exactly on the origin.
struct Geometry {
  Dims dims;
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  Mat3 direction = Mat3::Identity();

  /// Throws GeometryError if spacing, shape or direction break the grid invariants.
  void validate() const;

  [[nodiscard]] Vec3 voxel_to_world(const Vec3& idx) const;
  /// Continuous voxel coordinates, not clamped to the grid.
  [[nodiscard]] Vec3 world_to_voxel(const Vec3& p_mm) const;

  /// Same placement with a new spacing and a matching shape.
  [[nodiscard]] Geometry with_spacing(const Vec3& target_spacing) const;

  [[nodiscard]] bool same_grid(const Geometry& other, double tol = 1e-6) const;
};

/// Rounded voxel position (ties to even) of a continuous index.
std::array<int, 3> round_voxel(const Vec3& idx);

template <class T>
class Volume {
public:
  Volume() = default;
  explicit Volume(Geometry geometry, T fill = T{})
      : geometry_(std::move(geometry)), data_(geometry_.dims.count(), fill) {
    geometry_.validate();
  }
  Volume(Geometry geometry, std::vector<T> data) : geometry_(std::move(geometry)), data_(std::move(data)) {
    geometry_.validate();
    if (data_.size() != geometry_.dims.count()) throw GeometryError("volume data size does not match shape");
  }

  [[nodiscard]] const Geometry& geometry() const { return geometry_; }
  [[nodiscard]] const Dims& dims() const { return geometry_.dims; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] T& at(int i, int j, int k) { return data_[geometry_.dims.index(i, j, k)]; }
  [[nodiscard]] const T& at(int i, int j, int k) const { return data_[geometry_.dims.index(i, j, k)]; }

  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] std::vector<T>& storage() { return data_; }
  [[nodiscard]] const std::vector<T>& storage() const { return data_; }

  [[nodiscard]] Vec3 voxel_to_world(const Vec3& idx) const { return geometry_.voxel_to_world(idx); }
  [[nodiscard]] Vec3 world_to_voxel(const Vec3& p) const { return geometry_.world_to_voxel(p); }

private:
  Geometry geometry_;
  std::vector<T> data_;
};

using Volume3D = Volume<float>;
using LabelVolume = Volume<std::uint16_t>;

}  // namespace nnlm
