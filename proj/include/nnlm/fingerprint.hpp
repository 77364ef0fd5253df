#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nnlm/dataset.hpp"

namespace nnlm {

struct IntensityStats {
  double mean = 0.0;
  double std = 0.0;
  double p00_5 = 0.0;
  double p99_5 = 0.0;
  /// Mean and std of the samples after clipping to [p00_5, p99_5].
  double clipped_mean = 0.0;
  double clipped_std = 0.0;
};

struct Fingerprint {
  std::vector<std::string> case_ids;
  std::vector<Dims> shapes;
  std::vector<Vec3> spacings;
  IntensityStats intensity;
  std::string modality = "other";
  int class_count = 0;
  std::vector<int> landmark_counts;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::size_t kMaxSamplesPerCase = 10000;

/// Reads every case once. Intensity samples come from at most 10^4 voxels per case drawn
/// with a per-case seed, so the result does not depend on scan order.
Fingerprint compute_fingerprint(const std::vector<CaseRecord>& cases, const DatasetInfo& info, std::uint64_t seed = 0);

/// Percentile with linear interpolation between order statistics; q in [0, 100].
double percentile(std::vector<double> values, double q);

Json fingerprint_to_json(const Fingerprint& fp);
Fingerprint fingerprint_from_json(const Json& j);

}  // namespace nnlm
