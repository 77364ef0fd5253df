#include "nnlm/landmarks.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace nnlm {

std::optional<std::size_t> LandmarkSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

const Vec3& LandmarkSet::position(const std::string& name) const {
  const auto i = find(name);
  if (!i) throw ValidationError("landmark '" + name + "' not present in case " + case_id);
  return positions_mm[*i];
}

void LandmarkSet::validate() const {
  if (names.size() != positions_mm.size())
    throw ValidationError("case " + case_id + ": names and positions differ in length");
  if (!confidence.empty() && confidence.size() != names.size())
    throw ValidationError("case " + case_id + ": confidence length mismatch");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!seen.insert(names[i]).second) throw ValidationError("case " + case_id + ": duplicate landmark " + names[i]);
    if (!positions_mm[i].allFinite())
      throw ValidationError("case " + case_id + ": non-finite position for " + names[i]);
  }
}

Json landmarks_to_json(const LandmarkSet& lm) {
  Json arr = Json::array();
  for (std::size_t i = 0; i < lm.size(); ++i) {
    Json e;
    e["name"] = lm.names[i];
    e["position_mm"] = {lm.positions_mm[i][0], lm.positions_mm[i][1], lm.positions_mm[i][2]};
    if (!lm.confidence.empty()) e["confidence"] = lm.confidence[i];
    arr.push_back(std::move(e));
  }
  Json j;
  j["case_id"] = lm.case_id;
  j["landmarks"] = std::move(arr);
  return j;
}

LandmarkSet landmarks_from_json(const Json& j) {
  LandmarkSet lm;
  try {
    lm.case_id = j.at("case_id").get<std::string>();
    bool any_conf = false;
    std::vector<double> conf;
    for (const auto& e : j.at("landmarks")) {
      const auto& p = e.at("position_mm");
      if (!p.is_array() || p.size() != 3) throw ValidationError("position_mm must have 3 components");
      Vec3 v;
      for (int a = 0; a < 3; ++a) v[a] = p[a].is_number() ? p[a].get<double>() : std::numeric_limits<double>::quiet_NaN();
      lm.add(e.at("name").get<std::string>(), v);
      if (e.contains("confidence")) {
        any_conf = true;
        conf.push_back(e["confidence"].get<double>());
      } else {
        conf.push_back(0.0);
      }
    }
    if (any_conf) lm.confidence = std::move(conf);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed landmark document: ") + e.what());
  }
  return lm;
}

LandmarkSet read_landmarks(const std::filesystem::path& path) {
  try {
    return landmarks_from_json(read_json_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_landmarks(const LandmarkSet& lm, const std::filesystem::path& path) {
  write_json_file(path, landmarks_to_json(lm));
}

}  // namespace nnlm
