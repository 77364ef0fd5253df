#include "nnlm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nnlm/label_codec.hpp"
#include "nnlm/volume_io.hpp"

namespace nnlm {

void DatasetInfo::validate() const {
  if (classes.empty()) throw ConfigError("dataset declares no landmark classes");
  std::set<std::string> unique(classes.begin(), classes.end());
  if (unique.size() != classes.size()) throw ConfigError("dataset class list has duplicates");
  if (modality != "CT" && modality != "other") throw ConfigError("modality must be \"CT\" or \"other\"");
  for (const auto& m : biometry) {
    if (!unique.contains(m.a) || !unique.contains(m.b))
      throw ConfigError("biometry measure " + m.name + " references an unknown class");
  }
}

DatasetInfo dataset_info_from_json(const Json& j) {
  DatasetInfo info;
  try {
    info.name = j.at("name").get<std::string>();
    info.modality = j.value("modality", std::string("other"));
    info.classes = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("biometry")) {
      for (const auto& m : j["biometry"]) {
        if (!m.is_array() || m.size() != 3) throw ConfigError("biometry entries are [name, A, B]");
        info.biometry.push_back({m[0].get<std::string>(), m[1].get<std::string>(), m[2].get<std::string>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed dataset.json: ") + e.what());
  }
  info.validate();
  return info;
}

Json dataset_info_to_json(const DatasetInfo& info) {
  Json j;
  j["name"] = info.name;
  j["modality"] = info.modality;
  j["classes"] = info.classes;
  if (!info.biometry.empty()) {
    Json b = Json::array();
    for (const auto& m : info.biometry) b.push_back({m.name, m.a, m.b});
    j["biometry"] = std::move(b);
  }
  return j;
}

DatasetInfo read_dataset_info(const std::filesystem::path& dataset_dir) {
  return dataset_info_from_json(read_json_file(dataset_dir / "dataset.json"));
}

void write_dataset_info(const DatasetInfo& info, const std::filesystem::path& dataset_dir) {
  write_json_file(dataset_dir / "dataset.json", dataset_info_to_json(info));
}

Geometry CaseRecord::load_geometry() const { return geometry ? *geometry : read_geometry(image_path); }

std::vector<CaseRecord> list_cases(const std::filesystem::path& dataset_dir, Split split) {
  const fs::path images = dataset_dir / (split == Split::train ? "imagesTr" : "imagesTs");
  const fs::path labels = dataset_dir / (split == Split::train ? "landmarksTr" : "landmarksTs");
  std::vector<CaseRecord> out;
  if (!fs::is_directory(images)) {
    if (split == Split::test) return out;
    throw IoError("missing directory " + images.string());
  }
  for (const auto& entry : fs::directory_iterator(images)) {
    if (!entry.is_regular_file() || !is_volume_file(entry.path())) continue;
    CaseRecord rec;
    rec.case_id = case_id_from_filename(entry.path());
    rec.image_path = entry.path();
    const fs::path lm = labels / (rec.case_id + ".json");
    if (fs::exists(lm)) {
      rec.landmarks = read_landmarks(lm);
      if (rec.landmarks->case_id.empty()) rec.landmarks->case_id = rec.case_id;
    } else if (split == Split::train) {
      throw IoError("training case " + rec.case_id + " has no landmark file " + lm.string());
    }
    out.push_back(std::move(rec));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
  return out;
}

std::size_t ValidationReport::count(const std::string& kind) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const CaseIssue& c) { return c.kind == kind; }));
}

Json ValidationReport::to_json() const {
  const auto dump = [](const std::vector<CaseIssue>& v) {
    Json a = Json::array();
    for (const auto& c : v) a.push_back({{"case_id", c.case_id}, {"kind", c.kind}, {"detail", c.detail}});
    return a;
  };
  Json j;
  j["ok"] = ok();
  j["violations"] = dump(violations);
  j["warnings"] = dump(warnings);
  return j;
}

namespace {

std::string fmt_vec(const Vec3& v) {
  std::ostringstream s;
  s << '(' << v[0] << ", " << v[1] << ", " << v[2] << ')';
  return s.str();
}

void check_grid(const CaseRecord& c, const LandmarkSet& lm, const std::vector<std::size_t>& finite,
                const Geometry& g, const std::string& tag, ValidationReport& report) {
  std::vector<std::array<int, 3>> vox(lm.size());
  std::vector<bool> inside(lm.size(), false);
  for (std::size_t i : finite) {
    const Vec3 idx = g.world_to_voxel(lm.positions_mm[i]);
    vox[i] = round_voxel(idx);
    inside[i] = g.dims.contains(vox[i][0], vox[i][1], vox[i][2]);
    if (!inside[i]) {
      report.violations.push_back({c.case_id, "out_of_grid" + tag, lm.names[i] + " at voxel " + fmt_vec(idx)});
      continue;
    }
    if (!tag.empty()) continue;
    // Border clipping shifts the cube centroid by up to half a voxel per axis.
    Vec3 shift = Vec3::Zero();
    for (int a = 0; a < 3; ++a) {
      int lo = std::max(vox[i][a] - 1, 0), hi = std::min(vox[i][a] + 1, g.dims[a] - 1);
      shift[a] = 0.5 * (lo + hi) - vox[i][a];
    }
    if (shift.cwiseAbs().maxCoeff() > 0)
      report.warnings.push_back({c.case_id, "border_clipped",
                                 lm.names[i] + " centroid shift (voxels) " + fmt_vec(shift)});
  }
  for (std::size_t a = 0; a < finite.size(); ++a) {
    for (std::size_t b = a + 1; b < finite.size(); ++b) {
      const std::size_t i = finite[a], j = finite[b];
      if (!inside[i] || !inside[j]) continue;
      const int sep = chebyshev(vox[i], vox[j]);
      if (sep < kMinSeparationVoxels)
        report.violations.push_back({c.case_id, "separation" + (tag.empty() ? std::string("_native") : tag),
                                     lm.names[i] + " and " + lm.names[j] + " are " + std::to_string(sep) +
                                         " voxels apart"});
    }
  }
}

}  // namespace

ValidationReport validate_dataset(const std::vector<CaseRecord>& cases, std::span<const std::string> classes,
                                  const std::optional<Vec3>& target_spacing) {
  ValidationReport report;
  const std::set<std::string> declared(classes.begin(), classes.end());
  for (const auto& c : cases) {
    if (!c.landmarks) {
      report.violations.push_back({c.case_id, "no_landmarks", "case has no landmark file"});
      continue;
    }
    const LandmarkSet& lm = *c.landmarks;
    std::set<std::string> names(lm.names.begin(), lm.names.end());
    for (const auto& cls : classes) {
      if (!names.contains(cls)) report.violations.push_back({c.case_id, "missing_class", cls});
    }
    for (const auto& n : lm.names) {
      if (!declared.empty() && !declared.contains(n)) report.violations.push_back({c.case_id, "unknown_class", n});
    }
    std::vector<std::size_t> finite;
    for (std::size_t i = 0; i < lm.size(); ++i) {
      if (lm.positions_mm[i].allFinite()) {
        finite.push_back(i);
      } else {
        report.violations.push_back({c.case_id, "non_finite", lm.names[i]});
      }
    }
    Geometry g;
    try {
      g = c.load_geometry();
    } catch (const Error& e) {
      report.violations.push_back({c.case_id, "unreadable_image", e.what()});
      continue;
    }
    check_grid(c, lm, finite, g, "", report);
    if (target_spacing) check_grid(c, lm, finite, g.with_spacing(*target_spacing), "_target", report);
  }
  return report;
}

}  // namespace nnlm
