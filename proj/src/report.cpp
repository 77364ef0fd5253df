#include "nnlm/report.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nnlm/error.hpp"
#include "nnlm/log.hpp"

namespace nnlm {
namespace {

std::string f2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string threshold_label(double t, const std::string& unit) {
  std::ostringstream os;
  os << t << ' ' << (unit == "mm" ? "mm" : "vox");
  return os.str();
}

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kGtColour{0, 90, 255};
constexpr Rgb kPredColour{255, 220, 0};

void write_png(const fs::path& path, int w, int h, const std::vector<std::uint8_t>& rgb) {
  const fs::path tmp = path.string() + ".tmp";
  FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw IoError("PNG encoding failed for " + path.string());
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * w * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
  fs::rename(tmp, path);
}

void draw_cross(std::vector<std::uint8_t>& rgb, int w, int h, std::array<double, 2> at, int half, Rgb c) {
  const int cx = static_cast<int>(std::floor(at[0])), cy = static_cast<int>(std::floor(at[1]));
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    std::uint8_t* p = rgb.data() + (static_cast<std::size_t>(y) * w + x) * 3;
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  };
  for (int d = -half; d <= half; ++d) {
    put(cx + d, cy);
    put(cx, cy + d);
  }
}

}  // namespace

std::string format_mean_std(double mean, double std) { return f2(mean) + "±" + f2(std); }

std::string render_tables(const EvalReport& r) {
  const std::string u = r.unit == "mm" ? "mm" : "vox";
  std::ostringstream os;
  os << "| MRE±Std [" << u << "] |";
  for (double t : r.thresholds) os << " SDR " << threshold_label(t, r.unit) << " [%] |";
  os << "\n|---|";
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) os << "---|";
  os << "\n| " << format_mean_std(r.mre, r.std) << " |";
  for (double s : r.sdr) os << ' ' << f2(s) << " |";
  os << "\n\n| Landmark | n | MRE±Std [" << u << "] |";
  for (double t : r.thresholds) os << ' ' << threshold_label(t, r.unit) << " |";
  os << "\n|---|---|---|";
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& c : r.classes) {
    os << "| " << c.name << " | " << c.count << " | " << format_mean_std(c.mre, c.std) << " |";
    for (double s : c.sdr) os << ' ' << f2(s) << " |";
    os << '\n';
  }
  if (!r.biometry.empty()) {
    os << "\n| Measurement | Abs. error±Std [" << u << "] |\n|---|---|\n";
    for (const auto& b : r.biometry) os << "| " << b.name << " | " << format_mean_std(b.mean_abs_error, b.std) << " |\n";
  }
  return os.str();
}

std::array<double, 2> overlay_pixel(const Geometry& g, const Vec3& world, const OverlayStyle& style) {
  const Vec3 v = g.world_to_voxel(world);
  return {(v[0] + 0.5) * g.spacing[0] * style.pixels_per_mm, (v[1] + 0.5) * g.spacing[1] * style.pixels_per_mm};
}

std::vector<fs::path> render_overlays(const Volume3D& image, const LandmarkSet& gt, const LandmarkSet& pred,
                                      const fs::path& out_dir, const OverlayStyle& style) {
  const Geometry& g = image.geometry();
  const Dims& d = g.dims;
  const int w = std::max(1, static_cast<int>(std::lround(d.x * g.spacing[0] * style.pixels_per_mm)));
  const int h = std::max(1, static_cast<int>(std::lround(d.y * g.spacing[1] * style.pixels_per_mm)));
  std::vector<fs::path> written;
  fs::create_directories(out_dir);
  for (std::size_t n = 0; n < gt.size(); ++n) {
    const auto v = round_voxel(g.world_to_voxel(gt.positions_mm[n]));
    if (!gt.positions_mm[n].allFinite() || !d.contains(v[0], v[1], v[2])) {
      log_warn("overlay skipped: landmark " + gt.names[n] + " of case " + gt.case_id + " lies outside the volume");
      continue;
    }
    const int k = v[2];
    float lo = image.at(0, 0, k), hi = lo;
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        lo = std::min(lo, image.at(i, j, k));
        hi = std::max(hi, image.at(i, j, k));
      }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int i = std::min(d.x - 1, static_cast<int>(x / (g.spacing[0] * style.pixels_per_mm)));
        const int j = std::min(d.y - 1, static_cast<int>(y / (g.spacing[1] * style.pixels_per_mm)));
        const auto grey = static_cast<std::uint8_t>(std::lround((image.at(i, j, k) - lo) * scale));
        std::fill_n(rgb.begin() + (static_cast<std::ptrdiff_t>(y) * w + x) * 3, 3, grey);
      }
    draw_cross(rgb, w, h, overlay_pixel(g, gt.positions_mm[n], style), style.marker_half_width, kGtColour);
    if (const auto p = pred.find(gt.names[n]))
      draw_cross(rgb, w, h, overlay_pixel(g, pred.positions_mm[*p], style), style.marker_half_width, kPredColour);
    const fs::path file = out_dir / (gt.case_id + "_" + gt.names[n] + ".png");
    write_png(file, w, h, rgb);
    written.push_back(file);
  }
  return written;
}

void write_index(const fs::path& out_dir, const std::string& tables, const std::vector<fs::path>& figures) {
  std::ostringstream os;
  os << "# Evaluation\n\n" << tables << "\n";
  if (!figures.empty()) {
    os << "## Overlays\n\nGround truth in blue, prediction in yellow.\n\n";
    for (const auto& f : figures) {
      const std::string rel = fs::relative(f, out_dir).generic_string();
      os << "- [" << f.stem().string() << "](" << rel << ")\n";
    }
  }
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "index.md", os.str());
}

}  // namespace nnlm
