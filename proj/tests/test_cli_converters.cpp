#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "nnlm/convert.hpp"
#include "nnlm/dataset.hpp"
#include "nnlm/error.hpp"
#include "nnlm/folds.hpp"
#include "nnlm/label_codec.hpp"
#include "nnlm/synth.hpp"
#include "nnlm/volume_io.hpp"
#include "test_util.hpp"

using namespace nnlm;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> ids(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("case_" + std::to_string(100 + i));
  return v;
}

void text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void small_image(const fs::path& p) {
  Geometry g;
  g.dims = Dims{8, 8, 8};
  write_volume(Volume3D(g, 1.0f), p);
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + NNLM_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("fold sizes") {
  for (const auto& f : split_folds(ids(10), 5, 0)) CHECK(f.size() == 2);
  std::multiset<std::size_t> sizes;
  for (const auto& f : split_folds(ids(11), 5, 0)) sizes.insert(f.size());
  CHECK(sizes == std::multiset<std::size_t>{2, 2, 2, 2, 3});
  CHECK_THROWS_AS(split_folds(ids(3), 5, 0), ConfigError);
}

TEST_CASE("splits are a seeded partition independent of input order") {
  for (int n = 5; n < 40; n += 3) {
    auto in = ids(n);
    const Splits a = split_folds(in, 5, 7);
    std::reverse(in.begin(), in.end());
    CHECK(split_folds(in, 5, 7) == a);
    std::set<std::string> all;
    std::size_t lo = n, hi = 0;
    for (const auto& f : a) {
      all.insert(f.begin(), f.end());
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    CHECK(all.size() == static_cast<std::size_t>(n));
    CHECK(hi - lo <= 1);
    for (int k = 0; k < 5; ++k) CHECK(training_cases(a, k).size() + a[k].size() == static_cast<std::size_t>(n));
    CHECK(training_cases(a, -1).size() == static_cast<std::size_t>(n));
  }
  CHECK(split_folds(ids(20), 5, 1) != split_folds(ids(20), 5, 2));
}

TEST_CASE("splits.json round trip") {
  const fs::path dir = testutil::scratch("splits");
  const Splits s = split_folds(ids(12), 5, 3);
  write_splits(s, dir / "splits.json");
  CHECK(read_splits(dir / "splits.json") == s);
  CHECK(splits_to_json(s).contains("fold_0"));
  CHECK(splits_to_json(s).contains("fold_4"));
}

TEST_CASE("csv, fcsv and json point files") {
  const fs::path dir = testutil::scratch("points");
  std::vector<ConversionEvent> log;
  text(dir / "a.csv", "name,x,y,z\n# comment\nL1, 10.0, 20.0, 30.0\nL2,-1,2.5,3\n");
  const LandmarkSet a = read_point_file(dir / "a.csv", PointFormat::csv_points, false, log);
  REQUIRE(a.size() == 2);
  CHECK(a.names[0] == "L1");
  CHECK(a.positions_mm[0] == Vec3(10, 20, 30));
  CHECK(a.positions_mm[1] == Vec3(-1, 2.5, 3));

  text(dir / "b.fcsv",
       "# Markups fiducial file version = 4.11\n# CoordinateSystem = RAS\n"
       "# columns = id,x,y,z,ow,ox,oy,oz,vis,sel,lock,label,desc,associatedNodeID\n"
       "vtkMRMLMarkupsFiducialNode_0,1.5,-2,3,0,0,0,1,1,1,0,AC,,\n"
       "vtkMRMLMarkupsFiducialNode_1,4,5,-6,0,0,0,1,1,1,0,PC,,\n");
  const LandmarkSet ras = read_point_file(dir / "b.fcsv", PointFormat::fcsv_points, false, log);
  const LandmarkSet lps = read_point_file(dir / "b.fcsv", PointFormat::fcsv_points, true, log);
  REQUIRE(ras.size() == 2);
  CHECK(ras.names == std::vector<std::string>{"AC", "PC"});
  CHECK(ras.positions_mm[0] == Vec3(1.5, -2, 3));
  CHECK(lps.positions_mm[0] == Vec3(-1.5, 2, 3));
  CHECK(lps.positions_mm[1] == Vec3(-4, -5, -6));

  text(dir / "c.json", R"({"landmarks": [{"name": "n1", "position": [1, 2, 3]}, {"name": "n2", "position_mm": [4, 5, 6]}]})");
  const LandmarkSet c = read_point_file(dir / "c.json", PointFormat::coordinate_json, false, log);
  CHECK(c.position("n2") == Vec3(4, 5, 6));
  text(dir / "d.json", R"({"p": [7, 8, 9]})");
  CHECK(read_point_file(dir / "d.json", PointFormat::coordinate_json, true, log).position("p") == Vec3(-7, -8, 9));
  CHECK_THROWS_AS(parse_point_format("xml"), ConfigError);
}

TEST_CASE("dataset conversion") {
  const fs::path root = testutil::scratch("convert");
  small_image(root / "in" / "images" / "p1.nii.gz");
  small_image(root / "in" / "images" / "p2.nii.gz");
  text(root / "in" / "landmarks" / "p1.csv", "A,1,1,1\nB,5,5,5\n");
  text(root / "in" / "landmarks" / "p2.csv", "B,4,4,4\nA,2,2,2\n");
  ConvertOptions opt;
  opt.dataset_name = "demo";
  const ConversionLog log = convert_dataset(root / "in", root / "out", opt);
  CHECK(log.cases == std::vector<std::string>{"p1", "p2"});
  CHECK(log.classes == std::vector<std::string>{"A", "B"});
  const DatasetInfo info = read_dataset_info(root / "out");
  CHECK(info.name == "demo");
  CHECK(info.classes == std::vector<std::string>{"A", "B"});
  CHECK(fs::exists(root / "out" / "conversion_log.json"));
  const auto cases = list_cases(root / "out", Split::train);
  REQUIRE(cases.size() == 2);
  CHECK(cases[1].landmarks->position("A") == Vec3(2, 2, 2));

  SUBCASE("inconsistent classes report a per-case diff") {
    text(root / "in" / "landmarks" / "p2.csv", "A,2,2,2\nC,4,4,4\n");
    try {
      convert_dataset(root / "in", root / "out2", opt);
      FAIL("expected ConversionError");
    } catch (const ConversionError& e) {
      const std::string m = e.what();
      CHECK(m.find("p1") != std::string::npos);
      CHECK(m.find("p2") != std::string::npos);
      CHECK(m.find("C") != std::string::npos);
    }
  }
  SUBCASE("empty input") {
    fs::create_directories(root / "empty");
    CHECK_THROWS_AS(convert_dataset(root / "empty", root / "out3", opt), ConversionError);
  }
}

TEST_CASE("synthetic datasets are seed-reproducible and codec-consistent") {
  const fs::path root = testutil::scratch("synth");
  SynthOptions opt;
  opt.cases = 4;
  opt.test_cases = 1;
  opt.shape = Dims{32, 32, 32};
  opt.class_count = 4;
  opt.seed = 11;
  synth_generate(opt, root / "a");
  synth_generate(opt, root / "b");
  for (const char* f : {"dataset.json", "imagesTr/synth_000.nii.gz", "landmarksTr/synth_002.json",
                        "imagesTs/synth_003.nii.gz", "landmarksTs/synth_003.json"}) {
    REQUIRE_MESSAGE(fs::exists(root / "a" / f), f);
    CHECK_MESSAGE(slurp(root / "a" / f) == slurp(root / "b" / f), f);
  }
  opt.seed = 12;
  synth_generate(opt, root / "c");
  CHECK(slurp(root / "a" / "imagesTr/synth_000.nii.gz") != slurp(root / "c" / "imagesTr/synth_000.nii.gz"));

  const DatasetInfo info = read_dataset_info(root / "a");
  CHECK(info.classes.size() == 4);
  for (const auto& c : list_cases(root / "a", Split::train)) {
    const Geometry g = c.load_geometry();
    const LandmarkSet& lm = *c.landmarks;
    const LabelMap lab = encode_label_map(g, lm, 1, info.classes);
    CHECK(lab.clipped.empty());
    const DecodedLandmarks dec = decode_label_centroids(lab, g);
    for (std::size_t i = 0; i < lm.size(); ++i) {
      const auto r = round_voxel(g.world_to_voxel(lm.positions_mm[i]));
      CHECK((dec.landmarks.position(lm.names[i]) - g.voxel_to_world(Vec3(r[0], r[1], r[2]))).norm() < 1e-9);
    }
  }
}

TEST_CASE("noise-free renders with the same transform are identical") {
  SynthOptions opt;
  opt.shape = Dims{32, 32, 32};
  opt.noise = 0.0;
  Rng r1 = make_rng(4, "t"), r2 = make_rng(4, "t");
  const auto t1 = draw_transform(opt, r1), t2 = draw_transform(opt, r2);
  const SynthCase a = synth_render(opt, t1, nullptr, "x"), b = synth_render(opt, t2, nullptr, "y");
  CHECK(a.image.storage() == b.image.storage());
}

TEST_CASE("template separation violations are rejected") {
  CHECK_THROWS_AS(synth_template(Dims{32, 32, 32}, 200), ConfigError);
  CHECK_THROWS_AS(synth_template(Dims{16, 32, 32}, 4), ConfigError);
  const auto t = synth_template(Dims{64, 64, 64}, 6);
  CHECK(t.size() == 6);
}

TEST_CASE("command line surface") {
  const fs::path root = testutil::scratch("cli");
  const fs::path log = root / "log.txt";
  CHECK(run_cli("--help", log) == 0);
  CHECK(slurp(log).find("evaluate") != std::string::npos);
  CHECK(run_cli("evaluate --help", log) == 0);
  CHECK(slurp(log).find("--thresholds") != std::string::npos);
  CHECK(run_cli("plan --bogus-flag", log) != 0);
  CHECK(run_cli("fingerprint --dataset " + (root / "missing").string(), log) != 0);

  SUBCASE("evaluate with mismatched names exits 2") {
    LandmarkSet gt, pred;
    gt.case_id = pred.case_id = "c";
    gt.add("a", Vec3::Zero());
    gt.add("b", Vec3::Zero());
    pred.add("a", Vec3::Zero());
    pred.add("q", Vec3::Zero());
    write_landmarks(gt, root / "gt" / "c.json");
    write_landmarks(pred, root / "pred" / "c.json");
    CHECK(run_cli("evaluate --gt-dir " + (root / "gt").string() + " --pred-dir " + (root / "pred").string() +
                      " --out " + (root / "ev").string(),
                  log) == 2);
    const std::string msg = slurp(log);
    CHECK(msg.find("b") != std::string::npos);
    CHECK(msg.find("q") != std::string::npos);
  }

  SUBCASE("plan reflects overrides and is idempotent") {
    const std::string ds = (root / "ds").string(), res = (root / "res").string();
    REQUIRE(run_cli("synth --out " + ds + " --cases 6 --shape 32,32,32 --classes 2 --seed 1", log) == 0);
    text(root / "ov.json", R"({"patch_size": [16, 16, 16], "topk_percent": 10.0, "epochs": 3})");
    const std::string common = " --dataset " + ds + " --results " + res;
    REQUIRE(run_cli("fingerprint" + common, log) == 0);
    REQUIRE(run_cli("plan" + common + " --config " + (root / "ov.json").string(), log) == 0);
    const Json plan = read_json_file(root / "res" / "ds" / "plan.json");
    CHECK(plan["patch_size"] == Json::array({16, 16, 16}));
    CHECK(plan["topk_percent"] == 10.0);
    CHECK(plan["epochs"] == 3);
    const std::string first = slurp(root / "res" / "ds" / "plan.json");
    const std::string splits = slurp(root / "res" / "ds" / "splits.json");
    REQUIRE(run_cli("plan" + common + " --config " + (root / "ov.json").string(), log) == 0);
    CHECK(slurp(root / "res" / "ds" / "plan.json") == first);
    CHECK(slurp(root / "res" / "ds" / "splits.json") == splits);
  }
}
