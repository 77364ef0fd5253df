#pragma once

#include <filesystem>
#include <vector>

#include "nnlm/dataset.hpp"
#include "nnlm/label_codec.hpp"
#include "nnlm/plan.hpp"

namespace nnlm {

/// ct_clip_zscore: clip to [clip_low, clip_high] then (x - mean) / std with pooled stats.
/// zscore: per-volume (x - mean) / std. A zero spread divides by 1 and warns.
Volume3D normalize_intensity(const Volume3D& v, Normalization scheme, const NormalizationStats& stats);

struct PreprocessedCase {
  std::string case_id;
  Volume3D image;
  /// Empty label volume (all zeros, no values) for inference-only cases.
  LabelMap labels;
  LandmarkSet landmarks;
};

/// Resample to the plan spacing (linear), normalize, and re-encode label cubes on the
/// resampled grid from the world-space landmarks.
PreprocessedCase preprocess_case(const CaseRecord& c, const Plan& plan);

/// Image-only variant used at inference time.
Volume3D preprocess_image(const Volume3D& raw, const Plan& plan);

// Cache layout (one directory per dataset and plan hash):
//   <case>_image.nii.gz   float32 normalized image on the plan grid
//   <case>_labels.nii.gz  uint16 label cubes on the same grid
//   <case>.json           {"case_id", "landmarks": [...], "label_values": {name: value}}

/// Preprocesses every case into `cache_dir`, skipping cases whose files already exist.
void preprocess_dataset(const std::vector<CaseRecord>& cases, const Plan& plan,
                        const std::filesystem::path& cache_dir, bool overwrite = false);

PreprocessedCase load_preprocessed(const std::filesystem::path& cache_dir, const std::string& case_id);
std::vector<std::string> list_preprocessed(const std::filesystem::path& cache_dir);

}  // namespace nnlm
