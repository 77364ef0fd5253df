#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnlm/landmarks.hpp"

namespace nnlm {

/// Euclidean distances matched by name, in the order of `gt`. Name sets must be equal.
std::vector<double> radial_errors(const LandmarkSet& gt, const LandmarkSet& pred);

/// Percentage of errors <= t for each threshold (inclusive), full precision.
std::vector<double> sdr(std::span<const double> errors, std::span<const double> thresholds);

/// | |pred_A - pred_B| - |gt_A - gt_B| | per measurement.
std::vector<double> biometry_error(const LandmarkSet& gt, const LandmarkSet& pred,
                                   std::span<const BiometryMeasure> spec);

struct CaseEvaluation {
  std::string case_id;
  std::vector<std::string> names;
  std::vector<double> errors;
  std::vector<double> biometry;  // aligned with the report's biometry spec
};

CaseEvaluation evaluate_case(const LandmarkSet& gt, const LandmarkSet& pred, std::span<const BiometryMeasure> spec = {});

struct ClassRow {
  std::string name;
  std::size_t count = 0;
  double mre = 0.0;
  double std = 0.0;
  std::vector<double> sdr;
};

struct BiometryRow {
  std::string name;
  double mean_abs_error = 0.0;
  double std = 0.0;
};

struct EvalReport {
  std::string unit = "mm";
  std::vector<double> thresholds;
  double mre = 0.0;
  double std = 0.0;  // population std over all pooled instances
  std::vector<double> sdr;
  std::vector<ClassRow> classes;
  std::vector<BiometryRow> biometry;
  std::vector<CaseEvaluation> cases;

  [[nodiscard]] Json to_json() const;
};

inline const std::vector<double> kDefaultThresholds{2.0, 3.0, 4.0};

/// Micro aggregation over every landmark instance of every case. Per-class rows follow the
/// order of first appearance.
EvalReport aggregate_report(const std::vector<CaseEvaluation>& cases, std::span<const double> thresholds,
                            std::span<const BiometryMeasure> spec = {});

/// Pools mean and population std of a flat list.
std::pair<double, double> mean_std(std::span<const double> values);

/// Reads every landmark file of `gt_dir`, pairs it with the same case in `pred_dir`.
/// With `voxel_size` set, errors are divided by it (synthetic suites only).
EvalReport evaluate_directories(const std::filesystem::path& gt_dir, const std::filesystem::path& pred_dir,
                                std::span<const double> thresholds, std::span<const BiometryMeasure> spec = {},
                                std::optional<double> voxel_size = std::nullopt);

std::vector<BiometryMeasure> read_biometry_spec(const std::filesystem::path& path);

}  // namespace nnlm
