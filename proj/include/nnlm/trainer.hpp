#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "nnlm/augment.hpp"
#include "nnlm/plan.hpp"
#include "nnlm/preprocess.hpp"
#include "nnlm/sampling.hpp"
#include "nnlm/unet.hpp"

namespace nnlm {

struct TrainOptions {
  std::uint64_t seed = 0;
  std::optional<int> epochs;
  std::optional<int> iterations_per_epoch;
  AugmentConfig augment;
  /// Run sliding-window validation on the held-out cases after the last epoch.
  bool validate = true;
  bool verbose = false;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss_mean = 0.0;
  double loss_median = 0.0;
  double grad_norm_mean = 0.0;
  double loss_ema = 0.0;
};

struct TrainState {
  int epoch = 0;
  std::int64_t iteration = 0;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_loss_ema = std::numeric_limits<double>::infinity();
  double validation_mre = std::numeric_limits<double>::quiet_NaN();
  std::filesystem::path checkpoint_best;
  std::filesystem::path checkpoint_final;
};

/// One optimisation step on a sampled batch; returns the mean per-patch loss.
struct BatchStats {
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// Builds the batch for global iteration `iteration`: every sample draws from its own
/// stream (seed, "batch", iteration, b), so the sequence does not depend on thread count.
void prepare_batch(const std::vector<TrainingCase>& cases, const Plan& plan, const AugmentConfig& aug,
                   std::uint64_t seed, std::int64_t iteration, Tensor& input, std::vector<float>& target);

/// Loss and logit gradient of a batch (per-patch loss averaged over the batch).
double batch_loss(const Plan& plan, const Tensor& logits, std::span<const float> target, Tensor* grad);

/// Trains one fold and writes checkpoint_best, checkpoint_final, log.jsonl and progress.csv
/// into `out_dir`. A non-finite loss aborts with TrainingError after writing diagnostics.json.
TrainState train(const Plan& plan, const std::vector<TrainingCase>& train_cases,
                 const std::vector<PreprocessedCase>& validation_cases, const TrainOptions& opt,
                 const std::filesystem::path& out_dir);

// Checkpoint file: "NNLMCKPT", u32 version, u64 metadata length, metadata JSON (network spec,
// plan, progress), then every parameter and, when present, every momentum buffer as float32.
void save_checkpoint(const std::filesystem::path& path, const UNet& net, const SgdNesterov* opt, const Json& meta);

struct LoadedCheckpoint {
  UNet net;
  Json meta;
  std::vector<std::vector<float>> momentum;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Validation helper shared by train and predict: sliding window plus argmax on a preprocessed case.
LandmarkSet predict_case(UNet& net, const Plan& plan, const Volume3D& image, const std::string& case_id);

}  // namespace nnlm
