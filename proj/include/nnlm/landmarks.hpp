#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nnlm/geometry.hpp"
#include "nnlm/io_util.hpp"

namespace nnlm {

/// Ordered, named world-space points (mm) for one case.
struct LandmarkSet {
  std::string case_id;
  std::vector<std::string> names;
  std::vector<Vec3> positions_mm;
  /// Optional per-landmark score; filled for predictions, empty for ground truth.
  std::vector<double> confidence;

  [[nodiscard]] std::size_t size() const { return names.size(); }
  [[nodiscard]] bool empty() const { return names.empty(); }
  [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const;
  [[nodiscard]] const Vec3& position(const std::string& name) const;

  void add(std::string name, const Vec3& p) {
    names.push_back(std::move(name));
    positions_mm.push_back(p);
  }

  /// Throws ValidationError on duplicate names, misaligned arrays or non-finite positions.
  void validate() const;
};

/// A named distance between two landmarks (e.g. a biometric diameter).
struct BiometryMeasure {
  std::string name;
  std::string a;
  std::string b;
};

// Landmark file: {"case_id": str, "landmarks": [{"name": str, "position_mm": [x,y,z]}, ...]}.
// Predictions add an optional "confidence" per landmark.
Json landmarks_to_json(const LandmarkSet& lm);
/// Non-finite or null coordinates are kept as NaN so validation can report them.
LandmarkSet landmarks_from_json(const Json& j);
LandmarkSet read_landmarks(const std::filesystem::path& path);
void write_landmarks(const LandmarkSet& lm, const std::filesystem::path& path);

}  // namespace nnlm
