#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nnlm/geometry.hpp"
#include "nnlm/landmarks.hpp"

namespace nnlm {

// Dataset directory layout:
//   dataset.json     {name, modality: "CT"|"other", classes: [str], biometry?: [[name, A, B]]}
//   imagesTr/<case>.nii.gz   landmarksTr/<case>.json
//   imagesTs/<case>.nii.gz   landmarksTs/<case>.json   (test landmarks optional)

struct DatasetInfo {
  std::string name;
  std::string modality = "other";
  std::vector<std::string> classes;
  std::vector<BiometryMeasure> biometry;

  [[nodiscard]] bool is_ct() const { return modality == "CT"; }
  void validate() const;
};

DatasetInfo dataset_info_from_json(const Json& j);
Json dataset_info_to_json(const DatasetInfo& info);
DatasetInfo read_dataset_info(const std::filesystem::path& dataset_dir);
void write_dataset_info(const DatasetInfo& info, const std::filesystem::path& dataset_dir);

struct CaseRecord {
  std::string case_id;
  std::filesystem::path image_path;
  std::optional<LandmarkSet> landmarks;
  /// Cached grid; read from the image header when absent.
  std::optional<Geometry> geometry;

  [[nodiscard]] Geometry load_geometry() const;
};

enum class Split { train, test };

/// Cases sorted by case_id. Landmark files are required for the training split.
std::vector<CaseRecord> list_cases(const std::filesystem::path& dataset_dir, Split split);

struct CaseIssue {
  std::string case_id;
  std::string kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<CaseIssue> violations;
  /// Border-clipped cubes and similar non-fatal findings.
  std::vector<CaseIssue> warnings;

  [[nodiscard]] bool ok() const { return violations.empty(); }
  [[nodiscard]] std::size_t count(const std::string& kind) const;
  [[nodiscard]] Json to_json() const;
};

/// Minimum Chebyshev separation (voxels) that keeps 3x3x3 label cubes apart.
inline constexpr int kMinSeparationVoxels = 3;

/// Report-only check of landmark placement. Separation is tested on the native grid and,
/// when given, on the grid resampled to `target_spacing`.
ValidationReport validate_dataset(const std::vector<CaseRecord>& cases, std::span<const std::string> classes,
                                  const std::optional<Vec3>& target_spacing = std::nullopt);

}  // namespace nnlm
