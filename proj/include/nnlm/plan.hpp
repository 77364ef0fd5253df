#pragma once

#include <array>
#include <string>
#include <vector>

#include "nnlm/fingerprint.hpp"

namespace nnlm {

enum class Normalization { ct_clip_zscore, zscore };
enum class LossKind { bce_topk, mse };

struct LrSchedule {
  double initial = 1e-2;
  double power = 0.9;
  double momentum = 0.99;
  double weight_decay = 3e-5;
};

/// Intensity statistics copied from the fingerprint; used by ct_clip_zscore.
struct NormalizationStats {
  double clip_low = 0.0;
  double clip_high = 0.0;
  double mean = 0.0;
  double std = 1.0;
};

/// Self-configured experiment description. Every downstream stage reads only this.
struct Plan {
  std::vector<std::string> classes;
  Vec3 target_spacing = Vec3::Ones();
  Normalization normalization = Normalization::zscore;
  NormalizationStats intensity;
  std::array<int, 3> patch_size{32, 32, 32};
  int batch_size = 2;
  std::array<int, 3> num_pool_per_axis{2, 2, 2};
  int base_channels = 16;
  int max_channels = 128;
  int edt_radius_voxels = 15;
  LossKind loss = LossKind::bce_topk;
  double topk_percent = 20.0;
  int epochs = 50;
  int iterations_per_epoch = 50;
  LrSchedule lr;
  double oversample_foreground_fraction = 0.5;
  int fold_count = 5;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
  [[nodiscard]] int class_count() const { return static_cast<int>(classes.size()); }
  /// Stable 16-hex-digit digest of the serialized plan.
  [[nodiscard]] std::string hash() const;
};

inline constexpr int kMaxPatchEdge = 128;
inline constexpr int kMinPooledEdge = 8;
inline constexpr int kMaxPoolsPerAxis = 5;

/// Number of halvings that keep the edge >= 8, capped at 5.
int pools_for_edge(int edge);

/// Heuristic plan from a fingerprint. `overrides` is a partial plan document whose fields win.
Plan derive_plan(const Fingerprint& fp, const std::vector<std::string>& classes, const Json& overrides = Json::object());

Json plan_to_json(const Plan& plan);
Plan plan_from_json(const Json& j);
void apply_overrides(Plan& plan, const Json& overrides);

/// Polynomial decay: initial * (1 - epoch / epochs)^power.
double learning_rate(const LrSchedule& lr, int epoch, int epochs);

}  // namespace nnlm
