#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "nnlm/landmarks.hpp"
#include "nnlm/metrics.hpp"

namespace nnlm {

/// "1.50±0.50"
std::string format_mean_std(double mean, double std);

/// Markdown: a summary table (MRE±Std, SDR per threshold), a per-class table and, when
/// present, a biometry table. All values to 2 decimals.
std::string render_tables(const EvalReport& report);

struct OverlayStyle {
  double pixels_per_mm = 4.0;
  int marker_half_width = 3;
};

/// Pixel position (column, row) of a world point on the axial slice raster.
std::array<double, 2> overlay_pixel(const Geometry& g, const Vec3& world, const OverlayStyle& style);

/// One axial PNG per ground-truth landmark, through its rounded slice, with the ground
/// truth in blue and the prediction in yellow. Landmarks outside the volume are skipped with
/// a warning. Returns the written files.
std::vector<std::filesystem::path> render_overlays(const Volume3D& image, const LandmarkSet& gt,
                                                   const LandmarkSet& pred, const std::filesystem::path& out_dir,
                                                   const OverlayStyle& style = {});

/// index.md linking the tables and figures (paths relative to `out_dir`).
void write_index(const std::filesystem::path& out_dir, const std::string& tables,
                 const std::vector<std::filesystem::path>& figures);

}  // namespace nnlm
