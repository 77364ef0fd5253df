#include <doctest.h>

#include <cmath>

#include "nnlm/heatmap.hpp"
#include "nnlm/inference.hpp"
#include "nnlm/label_codec.hpp"
#include "nnlm/rng.hpp"

using namespace nnlm;

namespace {

Volume3D ramp_volume(const Dims& d, double scale = 0.001) {
  Geometry g;
  g.dims = d;
  Volume3D v(g);
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) v.at(i, j, k) = static_cast<float>(scale * (i + 2 * j + 3 * k));
  return v;
}

// Elementwise model: channel c outputs a squashed copy of the input shifted by c.
void elementwise(const Tensor& in, Tensor& out, int channels) {
  out.reshape(Shape{1, channels, in.shape().dims});
  for (int c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < in.shape().plane(); ++i)
      out.channel(0, c)[i] = static_cast<float>(1.0 / (1.0 + std::exp(-(in.channel(0, 0)[i] + 0.1 * c))));
}

double oracle_weight(int i, int n) {
  const double sigma = n / 8.0, c = (n - 1) / 2.0;
  return std::max(1e-6, std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma)));
}

HeatmapVolume one_hot(const Geometry& g, int channels) {
  HeatmapVolume h;
  h.geometry = g;
  h.channels = channels;
  h.data.assign(static_cast<std::size_t>(channels) * g.dims.count(), 0.0f);
  return h;
}

}  // namespace

TEST_CASE("tile starts cover the axis and end inside it") {
  CHECK(tile_starts(64, 32, 0.5) == std::vector<int>{0, 16, 32});
  CHECK(tile_starts(32, 32, 0.5) == std::vector<int>{0});
  CHECK(tile_starts(20, 32, 0.5) == std::vector<int>{0});
  CHECK(tile_starts(50, 32, 0.5) == std::vector<int>{0, 16, 18});
  CHECK(tile_starts(9, 5, 0.5) == std::vector<int>{0, 3, 4});
  for (int n = 1; n < 120; ++n)
    for (int p : {1, 4, 7, 16, 32}) {
      const auto s = tile_starts(n, p, 0.5);
      const int step = (p + 1) / 2;
      CHECK(s.front() == 0);
      CHECK(s.back() == std::max(0, n - p));
      for (std::size_t i = 1; i < s.size(); ++i) {
        CHECK(s[i] > s[i - 1]);
        CHECK(s[i] - s[i - 1] <= step);
      }
    }
}

TEST_CASE("Gaussian importance peaks at the centre with sigma = patch/8") {
  const auto w = gaussian_importance(Dims{16, 16, 8}, 1.0 / 8.0);
  const Dims d{16, 16, 8};
  // Peak pair (7,8) sits 0.5 from the centre, normalised to 1.
  CHECK(w[d.index(7, 8, 3)] == doctest::Approx(1.0));
  for (int i = 0; i < 16; ++i)
    CHECK(w[d.index(i, 7, 3)] == doctest::Approx(oracle_weight(i, 16) / oracle_weight(7, 16)).epsilon(1e-5));
  for (float v : w) CHECK((v > 0.0f && v <= 1.0f));
}

TEST_CASE("single tile equals the direct model output") {
  const Dims d{12, 8, 6};
  const Volume3D img = ramp_volume(d, 0.05);
  const PatchPredictor model = [](const Tensor& in, Tensor& out) { elementwise(in, out, 2); };
  const HeatmapVolume h = sliding_window_predict(model, img, d, 2);
  Tensor in(Shape{1, 1, d});
  std::copy(img.storage().begin(), img.storage().end(), in.ptr());
  Tensor direct;
  elementwise(in, direct, 2);
  REQUIRE(h.data.size() == direct.data().size());
  for (std::size_t i = 0; i < h.data.size(); ++i) CHECK(h.data[i] == doctest::Approx(direct.data()[i]).epsilon(1e-6));
}

TEST_CASE("constant model gives a constant field") {
  const PatchPredictor model = [](const Tensor& in, Tensor& out) {
    out.reshape(Shape{1, 3, in.shape().dims});
    for (int c = 0; c < 3; ++c) std::fill_n(out.channel(0, c), in.shape().plane(), 0.25f * (c + 1));
  };
  for (const Dims& d : {Dims{40, 33, 17}, Dims{16, 16, 16}, Dims{5, 30, 9}, Dims{64, 20, 20}}) {
    const HeatmapVolume h = sliding_window_predict(model, ramp_volume(d), Dims{16, 16, 16}, 3);
    CHECK(h.geometry.dims == d);
    for (int c = 0; c < 3; ++c)
      for (float v : h.channel(c)) CHECK(std::abs(v - 0.25f * (c + 1)) < 1e-6);
  }
}

TEST_CASE("two overlapping tiles blend with the Gaussian weights") {
  // 48 voxels along x, patch 32: tiles start at 0 and 16. Each tile reports the value at its
  // first voxel everywhere, so the blend is a pure function of the two weights.
  const Dims d{48, 1, 1};
  const Volume3D img = ramp_volume(d, 0.01);
  const PatchPredictor model = [](const Tensor& in, Tensor& out) {
    out.reshape(Shape{1, 1, in.shape().dims});
    std::fill_n(out.ptr(), in.shape().plane(), in.ptr()[0]);
  };
  const HeatmapVolume h = sliding_window_predict(model, img, Dims{32, 1, 1}, 1);
  const double v0 = 0.0, v1 = 0.16;
  for (int x = 0; x < 48; ++x) {
    double num = 0, den = 0;
    if (x < 32) {
      num += oracle_weight(x, 32) * v0;
      den += oracle_weight(x, 32);
    }
    if (x >= 16) {
      num += oracle_weight(x - 16, 32) * v1;
      den += oracle_weight(x - 16, 32);
    }
    CHECK(h.data[x] == doctest::Approx(num / den).epsilon(1e-5));
  }
  // Hand value at x = 24: weights exp(-0.5*(8.5/4)^2) and exp(-0.5*(7.5/4)^2) relative to the peak.
  const double a = std::exp(-0.5 * 8.5 * 8.5 / 16), b = std::exp(-0.5 * 7.5 * 7.5 / 16);
  CHECK(h.data[24] == doctest::Approx(0.16 * b / (a + b)).epsilon(1e-5));
}

TEST_CASE("image smaller than the patch is padded then cropped") {
  const Dims d{10, 6, 4};
  Volume3D img = ramp_volume(d, 0.1);
  const PatchPredictor model = [](const Tensor& in, Tensor& out) {
    CHECK(in.shape().dims == Dims{16, 16, 16});
    elementwise(in, out, 1);
  };
  const HeatmapVolume h = sliding_window_predict(model, img, Dims{16, 16, 16}, 1);
  CHECK(h.geometry.dims == d);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(h.data[i] == doctest::Approx(1.0 / (1.0 + std::exp(-img.storage()[i]))).epsilon(1e-6));
}

TEST_CASE("sliding window output stays in [0, 1] and is deterministic") {
  Rng rng = make_rng(3, "sw");
  Volume3D img = ramp_volume(Dims{37, 29, 21});
  for (auto& v : img.storage()) v = static_cast<float>(3 * normal(rng));
  const PatchPredictor model = [](const Tensor& in, Tensor& out) { elementwise(in, out, 2); };
  const HeatmapVolume a = sliding_window_predict(model, img, Dims{16, 16, 8}, 2);
  const HeatmapVolume b = sliding_window_predict(model, img, Dims{16, 16, 8}, 2);
  CHECK(a.data == b.data);
  for (float v : a.data) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("argmax decoding examples") {
  Geometry g;
  g.dims = Dims{8, 8, 8};
  g.spacing = Vec3(2, 2, 2);
  HeatmapVolume h = one_hot(g, 2);
  h.channel(0)[g.dims.index(3, 4, 5)] = 1.0f;
  const std::vector<std::string> cls{"a", "b"};
  const LandmarkSet lm = extract_landmarks(h, cls, "x");
  REQUIRE(lm.size() == 2);
  CHECK(lm.case_id == "x");
  CHECK(lm.position("a").isApprox(Vec3(6, 8, 10)));
  CHECK(lm.confidence[0] == 1.0);
  // All-zero channel: first voxel, confidence 0.
  CHECK(lm.position("b").isApprox(Vec3(0, 0, 0)));
  CHECK(lm.confidence[1] == 0.0);

  h.channel(1)[g.dims.index(5, 1, 1)] = 0.5f;
  h.channel(1)[g.dims.index(2, 2, 1)] = 0.5f;
  CHECK(extract_landmarks(h, cls).position("b").isApprox(Vec3(10, 2, 2)));
  CHECK_THROWS_AS(extract_landmarks(h, std::vector<std::string>{"a"}), ContractError);
}

TEST_CASE("planted EDT blobs are recovered at the nearest voxel") {
  Rng rng = make_rng(8, "plant");
  Geometry g;
  g.dims = Dims{40, 36, 32};
  g.spacing = Vec3(0.8, 1.1, 1.5);
  g.origin = Vec3(-10, 4, 2);
  for (int trial = 0; trial < 40; ++trial) {
    LandmarkSet lm;
    std::vector<std::string> names;
    std::vector<std::array<int, 3>> placed;
    for (int c = 0; c < 4; ++c) {
      for (;;) {
        const Vec3 idx(uniform(rng, 3, g.dims.x - 4), uniform(rng, 3, g.dims.y - 4), uniform(rng, 3, g.dims.z - 4));
        const auto r = round_voxel(idx);
        bool ok = true;
        for (const auto& q : placed) ok = ok && chebyshev(q, r) >= 5;
        if (!ok) continue;
        placed.push_back(r);
        names.push_back("p" + std::to_string(c));
        lm.add(names.back(), g.voxel_to_world(idx));
        break;
      }
    }
    const LabelMap lab = encode_label_map(g, lm, 1, names);
    const HeatmapTarget t = patch_to_heatmap(lab.volume.storage(), g.dims, 4, 7);
    HeatmapVolume h;
    h.geometry = g;
    h.channels = 4;
    h.data = t.channels;
    const LandmarkSet out = extract_landmarks(h, names);
    for (int c = 0; c < 4; ++c) {
      const Vec3 expected = g.voxel_to_world(Vec3(placed[c][0], placed[c][1], placed[c][2]));
      CHECK((out.positions_mm[c] - expected).norm() < 1e-9);
    }
    // Any strictly monotone rescaling leaves the decoded set unchanged.
    for (auto& v : h.data) v = std::sqrt(v) * 0.5f + 0.1f;
    const LandmarkSet mono = extract_landmarks(h, names);
    for (int c = 0; c < 4; ++c) CHECK(mono.positions_mm[c] == out.positions_mm[c]);
  }
}

TEST_CASE("network predictor produces probabilities of the right shape") {
  Plan p;
  p.classes = {"a", "b", "c"};
  p.patch_size = {16, 16, 16};
  p.num_pool_per_axis = {2, 2, 2};
  p.base_channels = 4;
  UNet net(network_spec_from_plan(p), 3);
  const PatchPredictor model = make_predictor(net);
  const HeatmapVolume h = sliding_window_predict(model, ramp_volume(Dims{24, 16, 20}, 0.01), p);
  CHECK(h.channels == 3);
  CHECK(h.data.size() == 3u * 24u * 16u * 20u);
  for (float v : h.data) CHECK((v > 0.0f && v < 1.0f));
}
