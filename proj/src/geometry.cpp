#include "nnlm/geometry.hpp"

#include <cmath>

namespace nnlm {

void Geometry::validate() const {
  if (dims.x < 1 || dims.y < 1 || dims.z < 1) throw GeometryError("volume shape components must be >= 1");
  for (int a = 0; a < 3; ++a) {
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw GeometryError("voxel spacing must be strictly positive");
  }
  if (!origin.allFinite()) throw GeometryError("origin must be finite");
  const Mat3 gram = direction.transpose() * direction;
  if (!((gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-6))
    throw GeometryError("direction matrix is not orthonormal");
}

Vec3 Geometry::voxel_to_world(const Vec3& idx) const {
  return origin + direction * spacing.cwiseProduct(idx);
}

Vec3 Geometry::world_to_voxel(const Vec3& p_mm) const {
  const double det = direction.determinant();
  if (!(std::abs(det) > 1e-12)) throw GeometryError("direction matrix is singular");
  const Vec3 scaled = direction.inverse() * (p_mm - origin);
  return scaled.cwiseQuotient(spacing);
}

Geometry Geometry::with_spacing(const Vec3& target_spacing) const {
  Geometry out = *this;
  out.spacing = target_spacing;
  for (int a = 0; a < 3; ++a) {
    const double n = std::round(dims[a] * spacing[a] / target_spacing[a]);
    out.dims[a] = std::max(1, static_cast<int>(n));
  }
  return out;
}

bool Geometry::same_grid(const Geometry& other, double tol) const {
  return dims == other.dims && (spacing - other.spacing).cwiseAbs().maxCoeff() <= tol &&
         (origin - other.origin).cwiseAbs().maxCoeff() <= tol &&
         (direction - other.direction).cwiseAbs().maxCoeff() <= tol;
}

std::array<int, 3> round_voxel(const Vec3& idx) {
  // nearbyint honours the default FE_TONEAREST mode: ties go to even.
  return {static_cast<int>(std::nearbyint(idx[0])), static_cast<int>(std::nearbyint(idx[1])),
          static_cast<int>(std::nearbyint(idx[2]))};
}

}  // namespace nnlm
