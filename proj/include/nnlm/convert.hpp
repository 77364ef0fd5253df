#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nnlm/landmarks.hpp"

namespace nnlm {

enum class PointFormat { csv_points, fcsv_points, coordinate_json };

PointFormat parse_point_format(const std::string& s);

// Input layout: <input>/images/<case>.<nii|nii.gz|raw> and <input>/landmarks/<case>.<csv|fcsv|json>.
//   csv_points       "name, x, y, z" per row; '#' comments and a non-numeric header row are skipped
//   fcsv_points      Slicer markups: '#' header lines, then id,x,y,z,...,label,... (label column 11)
//   coordinate_json  {"name": [x,y,z], ...}, or a list of {"name", "position"|"position_mm"|"coordinates"},
//                    optionally wrapped as {"landmarks": ...}
struct ConvertOptions {
  PointFormat format = PointFormat::csv_points;
  /// Negate x and y of every point (RAS <-> LPS). Never inferred from file headers.
  bool flip_ras_lps = false;
  std::string dataset_name = "converted";
  std::string modality = "other";
};

struct ConversionEvent {
  std::string case_id;
  std::string action;  // "dropped" | "renamed" | "skipped" | "note"
  std::string detail;
};

struct ConversionLog {
  std::vector<std::string> cases;
  std::vector<std::string> classes;
  std::vector<ConversionEvent> events;

  [[nodiscard]] Json to_json() const;
};

/// Parses one coordinate file; events are appended to `log`.
LandmarkSet read_point_file(const std::filesystem::path& path, PointFormat format, bool flip_ras_lps,
                            std::vector<ConversionEvent>& log);

/// Writes imagesTr/, landmarksTr/, dataset.json and conversion_log.json under `output_dir`.
ConversionLog convert_dataset(const std::filesystem::path& input_dir, const std::filesystem::path& output_dir,
                              const ConvertOptions& opt);

}  // namespace nnlm
