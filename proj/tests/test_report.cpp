#include <doctest.h>

#include <png.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nnlm/report.hpp"
#include "test_util.hpp"

using namespace nnlm;
namespace fs = std::filesystem;

namespace {

struct Rgba {
  int w = 0, h = 0;
  std::vector<std::uint8_t> rgb;
  [[nodiscard]] std::array<int, 3> at(int x, int y) const {
    const std::uint8_t* p = rgb.data() + (static_cast<std::size_t>(y) * w + x) * 3;
    return {p[0], p[1], p[2]};
  }
};

Rgba read_png(const fs::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  REQUIRE(f != nullptr);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_read_info(png, info);
  Rgba out;
  out.w = static_cast<int>(png_get_image_width(png, info));
  out.h = static_cast<int>(png_get_image_height(png, info));
  REQUIRE(png_get_color_type(png, info) == PNG_COLOR_TYPE_RGB);
  out.rgb.resize(static_cast<std::size_t>(out.w) * out.h * 3);
  for (int y = 0; y < out.h; ++y) png_read_row(png, out.rgb.data() + static_cast<std::size_t>(y) * out.w * 3, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(f);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines_starting(const std::string& s, const std::string& prefix) {
  std::istringstream is(s);
  int n = 0;
  for (std::string line; std::getline(is, line);) n += line.rfind(prefix, 0) == 0;
  return n;
}

Volume3D gradient_image() {
  Geometry g;
  g.dims = Dims{20, 16, 10};
  g.spacing = Vec3(0.5, 0.5, 2.0);
  Volume3D v(g);
  for (int k = 0; k < 10; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 20; ++i) v.at(i, j, k) = static_cast<float>(i + j);
  return v;
}

const std::array<int, 3> kBlue{0, 90, 255}, kYellow{255, 220, 0};

}  // namespace

TEST_CASE("mean and std formatting") {
  CHECK(format_mean_std(1.5, 0.5) == "1.50±0.50");
  CHECK(format_mean_std(0.0, 0.0) == "0.00±0.00");
  CHECK(format_mean_std(2.345, 10.0) == "2.35±10.00");
}

TEST_CASE("tables for a perfect case and per-class rows") {
  LandmarkSet gt;
  gt.case_id = "c";
  for (const char* n : {"a", "b", "c"}) gt.add(n, Vec3(1, 2, 3));
  const EvalReport r = aggregate_report({evaluate_case(gt, gt)}, kDefaultThresholds);
  const std::string t = render_tables(r);
  CHECK(t.find("0.00±0.00") != std::string::npos);
  CHECK(t.find("MRE±Std [mm]") != std::string::npos);
  CHECK(count_lines_starting(t, "| 0.00±0.00 | 100.00 | 100.00 | 100.00 |") == 1);
  for (const char* n : {"| a |", "| b |", "| c |"}) CHECK(count_lines_starting(t, n) == 1);

  EvalReport hand;
  hand.thresholds = {2, 3, 4};
  hand.mre = 1.5;
  hand.std = 0.5;
  hand.sdr = {50, 75, 100};
  hand.biometry = {{"len", 0.25, 0.125}};
  const std::string h = render_tables(hand);
  CHECK(h.find("| 1.50±0.50 | 50.00 | 75.00 | 100.00 |") != std::string::npos);
  CHECK(h.find("| len | 0.25±0.12 |") != std::string::npos);
}

TEST_CASE("overlay pixel arithmetic") {
  const Volume3D img = gradient_image();
  const Geometry& g = img.geometry();
  const OverlayStyle style;
  const auto a = overlay_pixel(g, g.voxel_to_world(Vec3(4, 6, 3)), style);
  const auto b = overlay_pixel(g, g.voxel_to_world(Vec3(14, 6, 3)), style);
  // 10 voxels * 0.5 mm * 4 px/mm
  CHECK(b[0] - a[0] == doctest::Approx(20.0));
  CHECK(b[1] == doctest::Approx(a[1]));
  CHECK(a[0] == doctest::Approx(4.5 * 0.5 * 4));
}

TEST_CASE("overlays mark ground truth in blue and prediction in yellow") {
  const fs::path dir = testutil::scratch("overlay");
  const Volume3D img = gradient_image();
  const Geometry& g = img.geometry();
  LandmarkSet gt, pred;
  gt.case_id = pred.case_id = "case1";
  gt.add("A", g.voxel_to_world(Vec3(4, 6, 3)));
  pred.add("A", g.voxel_to_world(Vec3(14, 6, 3)));
  const auto files = render_overlays(img, gt, pred, dir);
  REQUIRE(files.size() == 1);
  CHECK(files[0].filename() == "case1_A.png");
  const Rgba png = read_png(files[0]);
  CHECK(png.w == 40);
  CHECK(png.h == 32);
  const auto pg = overlay_pixel(g, gt.positions_mm[0], {});
  const auto pp = overlay_pixel(g, pred.positions_mm[0], {});
  CHECK(png.at(static_cast<int>(pg[0]), static_cast<int>(pg[1])) == kBlue);
  CHECK(png.at(static_cast<int>(pp[0]), static_cast<int>(pp[1])) == kYellow);
  CHECK(png.at(static_cast<int>(pp[0]) + 3, static_cast<int>(pp[1])) == kYellow);
  CHECK(png.at(static_cast<int>(pp[0]) + 3, static_cast<int>(pp[1]) + 3) != kYellow);

  // Identical prediction: the prediction marker is drawn last and covers the same pixels.
  const auto same = render_overlays(img, gt, gt, dir / "same");
  const Rgba s = read_png(same[0]);
  CHECK(s.at(static_cast<int>(pg[0]), static_cast<int>(pg[1])) == kYellow);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) CHECK(s.at(x, y) != kBlue);

  // Byte-stable re-render; inputs untouched.
  const std::string first = slurp(files[0]);
  render_overlays(img, gt, pred, dir);
  CHECK(slurp(files[0]) == first);
  CHECK(img.at(3, 2, 1) == 5.0f);
}

TEST_CASE("out-of-volume landmarks are skipped") {
  const fs::path dir = testutil::scratch("overlay_skip");
  const Volume3D img = gradient_image();
  LandmarkSet gt;
  gt.case_id = "c";
  gt.add("in", img.voxel_to_world(Vec3(1, 1, 1)));
  gt.add("out", img.voxel_to_world(Vec3(1, 1, 40)));
  const auto files = render_overlays(img, gt, gt, dir);
  REQUIRE(files.size() == 1);
  CHECK(files[0].filename() == "c_in.png");
}

TEST_CASE("index links tables and figures") {
  const fs::path dir = testutil::scratch("index");
  write_index(dir, "| t |\n", {dir / "figures" / "c_A.png"});
  const std::string s = slurp(dir / "index.md");
  CHECK(s.find("| t |") != std::string::npos);
  CHECK(s.find("(figures/c_A.png)") != std::string::npos);
}
