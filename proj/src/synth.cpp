#include "nnlm/synth.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

#include "nnlm/dataset.hpp"
#include "nnlm/error.hpp"
#include "nnlm/volume_io.hpp"

namespace nnlm {
namespace {

Vec3 centre_of(const Dims& d) { return Vec3((d.x - 1) / 2.0, (d.y - 1) / 2.0, (d.z - 1) / 2.0); }

Vec3 body_radii(const Dims& d) { return Vec3(0.36 * d.x, 0.32 * d.y, 0.28 * d.z); }

// Classes differ in polarity and in width.
double blob_sign(int c) { return c % 2 == 0 ? 1.0 : -1.0; }
double blob_sigma(int c) { return 1.5 + 0.75 * ((c / 2) % 3); }

std::string class_name(int c) { return "L" + std::to_string(c); }

void check_placement(const std::vector<Vec3>& pts, const Dims& shape, int margin) {
  for (std::size_t a = 0; a < pts.size(); ++a) {
    const auto v = round_voxel(pts[a]);
    for (int ax = 0; ax < 3; ++ax)
      if (v[ax] < margin || v[ax] > shape[ax] - 1 - margin)
        throw ConfigError("synthetic landmark " + class_name(static_cast<int>(a)) + " leaves the grid");
    for (std::size_t b = 0; b < a; ++b) {
      const auto w = round_voxel(pts[b]);
      int cheb = 0;
      for (int ax = 0; ax < 3; ++ax) cheb = std::max(cheb, std::abs(v[ax] - w[ax]));
      if (cheb < 3)
        throw ConfigError("synthetic landmarks " + class_name(static_cast<int>(b)) + " and " +
                          class_name(static_cast<int>(a)) + " closer than 3 voxels");
    }
  }
}

}  // namespace

std::vector<Vec3> synth_template(const Dims& shape, int class_count) {
  if (class_count < 1) throw ConfigError("class_count must be at least 1");
  for (int a = 0; a < 3; ++a)
    if (shape[a] < 32) throw ConfigError("synthetic shape must be at least 32 per axis");
  const Vec3 r = body_radii(shape);
  std::vector<Vec3> out;
  for (int c = 0; c < class_count; ++c) {
    if (class_count == 1) {
      out.emplace_back(0.0, 0.0, 0.0);
      break;
    }
    const double ang = 2.0 * std::numbers::pi * c / class_count;
    const double z = (c % 2 == 0 ? -0.35 : 0.35) * r[2];
    out.emplace_back(0.55 * r[0] * std::cos(ang), 0.55 * r[1] * std::sin(ang), z);
  }
  std::vector<Vec3> placed;
  for (const auto& o : out) placed.push_back(centre_of(shape) + o);
  check_placement(placed, shape, 2);
  return out;
}

SimilarityTransform draw_transform(const SynthOptions& opt, Rng& rng) {
  const double m = opt.max_rotation_deg * std::numbers::pi / 180.0;
  const double ax = uniform(rng, -m, m), ay = uniform(rng, -m, m), az = uniform(rng, -m, m);
  SimilarityTransform t;
  t.rotation = (Eigen::AngleAxisd(ax, Vec3::UnitX()) * Eigen::AngleAxisd(ay, Vec3::UnitY()) *
                Eigen::AngleAxisd(az, Vec3::UnitZ()))
                   .toRotationMatrix();
  t.scale = uniform(rng, 1.0 - opt.scale_jitter, 1.0 + opt.scale_jitter);
  for (int a = 0; a < 3; ++a) t.shift[a] = uniform(rng, -opt.max_shift_voxels, opt.max_shift_voxels);
  return t;
}

SynthCase synth_render(const SynthOptions& opt, const SimilarityTransform& t, Rng* noise_rng,
                       const std::string& case_id) {
  const Dims& d = opt.shape;
  const auto tmpl = synth_template(d, opt.class_count);
  const Vec3 c0 = centre_of(d);
  std::vector<Vec3> centres;
  for (const auto& o : tmpl) centres.push_back(c0 + t.shift + t.scale * (t.rotation * o));
  check_placement(centres, d, 2);

  Geometry g;
  g.dims = d;
  g.spacing = opt.spacing;
  SynthCase out{Volume3D(g, 0.0f), {}};
  out.landmarks.case_id = case_id;
  for (int c = 0; c < opt.class_count; ++c) out.landmarks.add(class_name(c), g.voxel_to_world(centres[c]));

  const Vec3 radii = body_radii(d);
  const Mat3 inv = t.rotation.transpose() / t.scale;
  auto& data = out.image.storage();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i) {
        const Vec3 u = inv * (Vec3(i, j, k) - c0 - t.shift);
        const double rho = std::sqrt((u.array() / radii.array()).square().sum());
        // Soft-edged body with a gentle internal gradient and ripple.
        const double body = 1.0 / (1.0 + std::exp((rho - 1.0) / 0.04));
        const double texture = 0.15 * u[2] / radii[2] + 0.08 * std::sin(u[0] / 3.0) * std::cos(u[1] / 4.0);
        data[d.index(i, j, k)] = static_cast<float>(kPhantomIntensity * body * (1.0 + texture));
      }
    }
  }
  for (int c = 0; c < opt.class_count; ++c) {
    const double s = blob_sigma(c) * t.scale;
    const double amp = 0.8 * kPhantomIntensity * blob_sign(c);
    const int reach = static_cast<int>(std::ceil(4.0 * s));
    const auto v = round_voxel(centres[c]);
    for (int k = std::max(0, v[2] - reach); k <= std::min(d.z - 1, v[2] + reach); ++k)
      for (int j = std::max(0, v[1] - reach); j <= std::min(d.y - 1, v[1] + reach); ++j)
        for (int i = std::max(0, v[0] - reach); i <= std::min(d.x - 1, v[0] + reach); ++i) {
          const double r = (Vec3(i, j, k) - centres[c]).norm();
          data[d.index(i, j, k)] += static_cast<float>(amp * std::exp(-0.5 * r * r / (s * s)));
        }
  }
  if (noise_rng && opt.noise > 0.0) {
    const double sigma = opt.noise * kPhantomIntensity;
    for (auto& x : data) x += static_cast<float>(sigma * normal(*noise_rng));
  }
  return out;
}

void synth_generate(const SynthOptions& opt, const fs::path& out_dir) {
  if (opt.test_cases < 0 || opt.cases - opt.test_cases < 1)
    throw ConfigError("synthetic dataset needs at least one training case and test_cases >= 0");
  synth_template(opt.shape, opt.class_count);

  DatasetInfo info;
  info.name = opt.name;
  info.modality = "other";
  for (int c = 0; c < opt.class_count; ++c) info.classes.push_back(class_name(c));
  for (int c = 0; c + 1 < opt.class_count; c += 2)
    info.biometry.push_back({"d_" + class_name(c) + "_" + class_name(c + 1), class_name(c), class_name(c + 1)});
  fs::create_directories(out_dir);
  write_dataset_info(info, out_dir);

  for (int n = 0; n < opt.cases; ++n) {
    const bool test = n >= opt.cases - opt.test_cases;
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%03d", n);
    Rng trng = make_rng(opt.seed, "synth_transform", {static_cast<std::uint64_t>(n)});
    Rng nrng = make_rng(opt.seed, "synth_noise", {static_cast<std::uint64_t>(n)});
    const SynthCase sc = synth_render(opt, draw_transform(opt, trng), &nrng, id);
    const fs::path img_dir = out_dir / (test ? "imagesTs" : "imagesTr");
    const fs::path lm_dir = out_dir / (test ? "landmarksTs" : "landmarksTr");
    fs::create_directories(img_dir);
    fs::create_directories(lm_dir);
    write_volume(sc.image, img_dir / (std::string(id) + ".nii.gz"));
    write_landmarks(sc.landmarks, lm_dir / (std::string(id) + ".json"));
  }
}

}  // namespace nnlm
