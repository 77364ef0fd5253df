#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "nnlm/heatmap.hpp"
#include "nnlm/label_codec.hpp"
#include "nnlm/loss.hpp"
#include "nnlm/rng.hpp"

using namespace nnlm;

namespace {

// Independent oracle: sort a copy descending and average the first k.
double oracle_topk(const std::vector<double>& logits, const std::vector<float>& target, double pct) {
  std::vector<double> l;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double p = 1.0 / (1.0 + std::exp(-logits[i]));
    p = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
    const double t = target[i];
    l.push_back(-(t * std::log(p) + (1.0 - t) * std::log(1.0 - p)));
  }
  std::sort(l.begin(), l.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(pct / 100.0 * l.size() - 1e-9)));
  return std::accumulate(l.begin(), l.begin() + k, 0.0) / k;
}

std::vector<std::uint16_t> cube_patch(const Dims& d, const std::array<int, 3>& c, std::uint16_t v) {
  std::vector<std::uint16_t> lab(d.count(), 0);
  for (int k = -1; k <= 1; ++k)
    for (int j = -1; j <= 1; ++j)
      for (int i = -1; i <= 1; ++i)
        if (d.contains(c[0] + i, c[1] + j, c[2] + k)) lab[d.index(c[0] + i, c[1] + j, c[2] + k)] = v;
  return lab;
}

}  // namespace

TEST_CASE("EDT profile values") {
  CHECK(edt_profile(0.0, 15) == 1.0);
  CHECK(edt_profile(15.0, 15) == 0.0);
  CHECK(edt_profile(20.0, 15) == 0.0);
  CHECK(edt_profile(7.5, 15) == 0.5);
}

TEST_CASE("heatmap from a single cube") {
  const Dims d{32, 32, 32};
  const auto lab = cube_patch(d, {10, 12, 14}, 2);
  const HeatmapTarget h = patch_to_heatmap(lab, d, 3, 15);
  REQUIRE(h.channel_count() == 3);
  CHECK(!h.centers[0]);
  CHECK(!h.centers[2]);
  REQUIRE(h.centers[1]);
  CHECK(h.centers[1]->isApprox(Vec3(10, 12, 14)));
  const auto ch = h.channel(1);
  CHECK(ch[d.index(10, 12, 14)] == 1.0f);
  CHECK(ch[d.index(25, 12, 14)] == 0.0f);
  CHECK(ch[d.index(17, 12, 14)] == doctest::Approx(8.0 / 15.0));
  for (float v : h.channel(0)) REQUIRE(v == 0.0f);
  for (float v : h.channel(2)) REQUIRE(v == 0.0f);
}

TEST_CASE("heatmap property sweep over radii") {
  Rng rng = make_rng(4, "heatmap_sweep");
  const Dims d{40, 40, 40};
  for (int r : {7, 11, 15, 19, 23}) {
    for (int t = 0; t < 10; ++t) {
      const Vec3 c(uniform(rng, 5, 35), uniform(rng, 5, 35), uniform(rng, 5, 35));
      std::vector<float> ch(d.count(), 0.0f);
      paint_edt(ch, d, c, r);
      const auto rc = round_voxel(c);
      double best = -1;
      std::size_t arg = 0;
      for (int k = 0; k < d.z; ++k)
        for (int j = 0; j < d.y; ++j)
          for (int i = 0; i < d.x; ++i) {
            const float v = ch[d.index(i, j, k)];
            REQUIRE(v >= 0.0f);
            REQUIRE(v <= 1.0f);
            const double dist = (Vec3(i, j, k) - c).norm();
            if (dist >= r) REQUIRE(v == 0.0f);
            else REQUIRE(v == doctest::Approx((r - dist) / r).epsilon(1e-6));
            if (v > best) {
              best = v;
              arg = d.index(i, j, k);
            }
          }
      CHECK(arg == d.index(rc[0], rc[1], rc[2]));
    }
    // Exact centre gets 1; strictly decreasing along a ray until zero.
    std::vector<float> ch(d.count(), 0.0f);
    paint_edt(ch, d, Vec3(20, 20, 20), r);
    CHECK(ch[d.index(20, 20, 20)] == 1.0f);
    for (int s = 1; s < r && 20 + s < d.x; ++s) CHECK(ch[d.index(20 + s, 20, 20)] < ch[d.index(19 + s, 20, 20)]);
  }
}

TEST_CASE("heatmap is translation equivariant away from borders") {
  const Dims d{40, 40, 40};
  const HeatmapTarget a = patch_to_heatmap(cube_patch(d, {15, 16, 17}, 1), d, 1, 7);
  const HeatmapTarget b = patch_to_heatmap(cube_patch(d, {18, 14, 20}, 1), d, 1, 7);
  for (int k = 8; k < 26; ++k)
    for (int j = 8; j < 26; ++j)
      for (int i = 8; i < 26; ++i) REQUIRE(a.channel(0)[d.index(i, j, k)] == b.channel(0)[d.index(i + 3, j - 2, k + 3)]);
}

TEST_CASE("half cube at the patch border uses its own centroid") {
  const Dims d{16, 16, 16};
  const HeatmapTarget h = patch_to_heatmap(cube_patch(d, {0, 8, 8}, 1), d, 1, 5);
  REQUIRE(h.centers[0]);
  CHECK(h.centers[0]->isApprox(Vec3(0.5, 8, 8)));
}

TEST_CASE("BCE-TopK hand examples") {
  SUBCASE("near perfect prediction") {
    std::vector<float> target(64, 0.0f);
    std::vector<double> logits(64, -20.0);
    for (int i : {3, 17, 40}) {
      target[i] = 1.0f;
      logits[i] = 20.0;
    }
    for (double k : {1.0, 20.0, 100.0}) CHECK(bce_topk_loss<double>(logits, target, k) < 1e-6);
  }
  SUBCASE("hand-set losses, k = 20% of 5 selects one") {
    // logit z with target 0 gives loss log(1 + e^z); invert for the desired losses.
    const std::vector<double> want{0.9, 0.5, 0.1, 0.05, 0.01};
    std::vector<double> logits;
    for (double l : want) logits.push_back(std::log(std::exp(l) - 1.0));
    const std::vector<float> target(5, 0.0f);
    CHECK(bce_topk_loss<double>(logits, target, 20.0) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(topk_count(5, 20.0) == 1);
  }
  SUBCASE("k = 100 equals mean BCE") {
    Rng rng = make_rng(1, "bce_mean");
    std::vector<double> logits(200);
    std::vector<float> target(200);
    double mean = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      logits[i] = 3 * normal(rng);
      target[i] = static_cast<float>(uniform(rng));
      mean += bce(logits[i], target[i]);
    }
    mean /= logits.size();
    CHECK(std::abs(bce_topk_loss<double>(logits, target, 100.0) - mean) < 1e-10);
  }
}

TEST_CASE("BCE-TopK matches the sorting oracle and is monotone in k") {
  Rng rng = make_rng(2, "topk_oracle");
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 64 + uniform_index(rng, 200);
    std::vector<double> logits(n);
    std::vector<float> target(n);
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = 4 * normal(rng);
      target[i] = uniform(rng) < 0.2 ? static_cast<float>(uniform(rng)) : 0.0f;
    }
    double prev = std::numeric_limits<double>::infinity();
    for (double k : {1.0, 5.0, 10.0, 20.0, 35.0, 50.0, 80.0, 100.0}) {
      const double l = bce_topk_loss<double>(logits, target, k);
      CHECK(std::abs(l - oracle_topk(logits, target, k)) < 1e-12);
      CHECK(l <= prev + 1e-15);
      prev = l;
    }
  }
}

TEST_CASE("BCE-TopK is invariant to voxel order") {
  Rng rng = make_rng(3, "perm");
  std::vector<double> logits(100);
  std::vector<float> target(100);
  for (std::size_t i = 0; i < 100; ++i) {
    logits[i] = normal(rng);
    target[i] = static_cast<float>(uniform(rng));
  }
  const double a = bce_topk_loss<double>(logits, target, 20.0);
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::vector<double> l2;
  std::vector<float> t2;
  for (auto p : perm) {
    l2.push_back(logits[p]);
    t2.push_back(target[p]);
  }
  CHECK(bce_topk_loss<double>(l2, t2, 20.0) == doctest::Approx(a).epsilon(1e-14));
}

TEST_CASE("BCE-TopK gradient agrees with finite differences") {
  Rng rng = make_rng(6, "fd");
  const Dims d{4, 4, 4};
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 * d.count();
    std::vector<double> z(n), g(n);
    std::vector<float> target(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = 2 * normal(rng);
      target[i] = static_cast<float>(uniform(rng));
    }
    bce_topk_loss<double>(z, target, 20.0, g);
    const double h = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
      auto zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (bce_topk_loss<double>(zp, target, 20.0) - bce_topk_loss<double>(zm, target, 20.0)) / (2 * h);
      REQUIRE(std::abs(fd - g[i]) <= 1e-4 * std::max(std::abs(fd), std::abs(g[i])) + 1e-9);
    }
  }
}

TEST_CASE("loss contract errors") {
  const std::vector<double> z(4, 0.0);
  const std::vector<float> t3(3, 0.0f), t4(4, 0.0f);
  CHECK_THROWS_AS(bce_topk_loss<double>(z, t3, 20.0), ContractError);
  CHECK_THROWS_AS(bce_topk_loss<double>(z, t4, 0.0), ContractError);
  CHECK_THROWS_AS(mse_loss<double>(z, t3), ContractError);
}

TEST_CASE("MSE examples and gradient") {
  CHECK(mse_loss<double>(std::vector<double>{40.0, -40.0}, std::vector<float>{1.0f, 0.0f}) < 1e-10);
  CHECK(mse_loss<double>(std::vector<double>(8, 0.0), std::vector<float>(8, 0.0f)) == 0.25);
  CHECK(mse_loss<double>(std::vector<double>{0.0}, std::vector<float>{1.0f}) == 0.25);
  Rng rng = make_rng(7, "mse_fd");
  std::vector<double> z(30), g(30);
  std::vector<float> t(30);
  for (std::size_t i = 0; i < 30; ++i) {
    z[i] = normal(rng);
    t[i] = static_cast<float>(uniform(rng));
  }
  mse_loss<double>(z, t, g);
  for (std::size_t i = 0; i < 30; ++i) {
    auto zp = z, zm = z;
    zp[i] += 1e-6;
    zm[i] -= 1e-6;
    CHECK((mse_loss<double>(zp, t) - mse_loss<double>(zm, t)) / 2e-6 == doctest::Approx(g[i]).epsilon(1e-5));
  }
}

TEST_CASE("topk_select ties go to the lowest indices") {
  const std::vector<double> v{1, 3, 3, 3, 0};
  CHECK(topk_select(v, 2) == std::vector<std::size_t>{1, 2});
  CHECK(topk_select(v, 4) == std::vector<std::size_t>{0, 1, 2, 3});
}
