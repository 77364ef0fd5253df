#pragma once

#include <filesystem>

#include "nnlm/geometry.hpp"

namespace nnlm {

// Volumes are stored as NIfTI-1 (.nii, .nii.gz) or as raw little-endian float32 (.raw) with a
// text sidecar "<file>.txt" holding shape, spacing, origin and row-major direction.
//
// NIfTI affines are RAS; the in-memory world frame is LPS, so x and y rows are negated on
// read and write.

Geometry read_geometry(const std::filesystem::path& path);
Volume3D read_volume(const std::filesystem::path& path);
LabelVolume read_label_volume(const std::filesystem::path& path);

void write_volume(const Volume3D& v, const std::filesystem::path& path);
void write_volume(const LabelVolume& v, const std::filesystem::path& path);

bool is_volume_file(const std::filesystem::path& path);

}  // namespace nnlm
