#include "nnlm/plan.hpp"

#include <algorithm>
#include <cmath>

namespace nnlm {
namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const char* to_string(Normalization n) { return n == Normalization::ct_clip_zscore ? "ct_clip_zscore" : "zscore"; }
const char* to_string(LossKind l) { return l == LossKind::bce_topk ? "bce_topk" : "mse"; }

Normalization normalization_from(const std::string& s) {
  if (s == "ct_clip_zscore") return Normalization::ct_clip_zscore;
  if (s == "zscore") return Normalization::zscore;
  throw ConfigError("unknown normalization '" + s + "'");
}

LossKind loss_from(const std::string& s) {
  if (s == "bce_topk") return LossKind::bce_topk;
  if (s == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + s + "'");
}

template <class T>
std::array<T, 3> triple(const Json& j, const char* key) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(key) + " needs 3 components");
  return {j[0].get<T>(), j[1].get<T>(), j[2].get<T>()};
}

}  // namespace

int pools_for_edge(int edge) {
  int pools = 0;
  while (pools < kMaxPoolsPerAxis && edge / (1 << (pools + 1)) >= kMinPooledEdge &&
         edge % (1 << (pools + 1)) == 0) {
    ++pools;
  }
  return pools;
}

void Plan::validate() const {
  if (classes.empty()) throw ConfigError("plan has no classes");
  for (int a = 0; a < 3; ++a) {
    if (!(target_spacing[a] > 0)) throw ConfigError("target spacing must be positive");
    if (patch_size[a] < 1) throw ConfigError("patch size must be positive");
    if (num_pool_per_axis[a] < 0 || num_pool_per_axis[a] > kMaxPoolsPerAxis)
      throw ConfigError("pool count per axis must lie in [0, 5]");
    if (patch_size[a] % (1 << num_pool_per_axis[a]) != 0)
      throw ConfigError("patch size " + std::to_string(patch_size[a]) + " is not divisible by 2^" +
                        std::to_string(num_pool_per_axis[a]));
  }
  if (!(topk_percent > 0.0 && topk_percent <= 100.0)) throw ConfigError("topk_percent must lie in (0, 100]");
  if (edt_radius_voxels < 1) throw ConfigError("edt_radius_voxels must be >= 1");
  if (fold_count < 2) throw ConfigError("fold_count must be >= 2");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (base_channels < 1 || max_channels < base_channels) throw ConfigError("channel widths are inconsistent");
  if (epochs < 1 || iterations_per_epoch < 1) throw ConfigError("epochs and iterations must be >= 1");
  if (!(oversample_foreground_fraction >= 0.0 && oversample_foreground_fraction <= 1.0))
    throw ConfigError("oversample_foreground_fraction must lie in [0, 1]");
  if (!(intensity.std > 0.0)) throw ConfigError("normalization std must be positive");
  if (!(lr.initial > 0.0) || lr.momentum < 0.0 || lr.momentum >= 1.0) throw ConfigError("bad learning-rate schedule");
}

std::string Plan::hash() const { return fnv1a_hex(plan_to_json(*this).dump()); }

Plan derive_plan(const Fingerprint& fp, const std::vector<std::string>& classes, const Json& overrides) {
  fp.validate();
  Plan plan;
  plan.classes = classes;
  for (int a = 0; a < 3; ++a) {
    std::vector<double> s;
    for (const auto& sp : fp.spacings) s.push_back(sp[a]);
    plan.target_spacing[a] = median(std::move(s));
  }
  plan.normalization = fp.modality == "CT" ? Normalization::ct_clip_zscore : Normalization::zscore;
  plan.intensity = {fp.intensity.p00_5, fp.intensity.p99_5, fp.intensity.clipped_mean,
                    fp.intensity.clipped_std > 0 ? fp.intensity.clipped_std : 1.0};
  for (int a = 0; a < 3; ++a) {
    std::vector<double> edges;
    for (std::size_t c = 0; c < fp.shapes.size(); ++c)
      edges.push_back(std::max(1.0, std::round(fp.shapes[c][a] * fp.spacings[c][a] / plan.target_spacing[a])));
    const int edge = std::min(kMaxPatchEdge, static_cast<int>(std::round(median(std::move(edges)))));
    int pools = 0;
    while (pools < kMaxPoolsPerAxis && edge / (1 << (pools + 1)) >= kMinPooledEdge) ++pools;
    plan.num_pool_per_axis[a] = pools;
    plan.patch_size[a] = (edge >> pools) << pools;
  }
  apply_overrides(plan, overrides);
  plan.validate();
  return plan;
}

Json plan_to_json(const Plan& p) {
  Json j;
  j["classes"] = p.classes;
  j["target_spacing"] = {p.target_spacing[0], p.target_spacing[1], p.target_spacing[2]};
  j["normalization"] = to_string(p.normalization);
  j["intensity"] = {{"clip_low", p.intensity.clip_low},
                    {"clip_high", p.intensity.clip_high},
                    {"mean", p.intensity.mean},
                    {"std", p.intensity.std}};
  j["patch_size"] = p.patch_size;
  j["batch_size"] = p.batch_size;
  j["num_pool_per_axis"] = p.num_pool_per_axis;
  j["base_channels"] = p.base_channels;
  j["max_channels"] = p.max_channels;
  j["edt_radius_voxels"] = p.edt_radius_voxels;
  j["loss"] = to_string(p.loss);
  j["topk_percent"] = p.topk_percent;
  j["epochs"] = p.epochs;
  j["iterations_per_epoch"] = p.iterations_per_epoch;
  j["lr"] = {{"initial", p.lr.initial},
             {"power", p.lr.power},
             {"momentum", p.lr.momentum},
             {"weight_decay", p.lr.weight_decay}};
  j["oversample_foreground_fraction"] = p.oversample_foreground_fraction;
  j["fold_count"] = p.fold_count;
  return j;
}

void apply_overrides(Plan& p, const Json& o) {
  if (o.is_null()) return;
  if (!o.is_object()) throw ConfigError("plan overrides must be a JSON object");
  try {
    for (const auto& [key, v] : o.items()) {
      if (key == "classes") p.classes = v.get<std::vector<std::string>>();
      else if (key == "target_spacing") {
        const auto t = triple<double>(v, "target_spacing");
        p.target_spacing = Vec3(t[0], t[1], t[2]);
      } else if (key == "normalization") p.normalization = normalization_from(v.get<std::string>());
      else if (key == "intensity") {
        for (const auto& [k, x] : v.items()) {
          if (k == "clip_low") p.intensity.clip_low = x.get<double>();
          else if (k == "clip_high") p.intensity.clip_high = x.get<double>();
          else if (k == "mean") p.intensity.mean = x.get<double>();
          else if (k == "std") p.intensity.std = x.get<double>();
          else throw ConfigError("unknown intensity field '" + k + "'");
        }
      } else if (key == "patch_size") {
        p.patch_size = triple<int>(v, "patch_size");
        if (!o.contains("num_pool_per_axis")) {
          for (int a = 0; a < 3; ++a) p.num_pool_per_axis[a] = pools_for_edge(p.patch_size[a]);
        }
      } else if (key == "batch_size") p.batch_size = v.get<int>();
      else if (key == "num_pool_per_axis") p.num_pool_per_axis = triple<int>(v, "num_pool_per_axis");
      else if (key == "base_channels") p.base_channels = v.get<int>();
      else if (key == "max_channels") p.max_channels = v.get<int>();
      else if (key == "edt_radius_voxels") p.edt_radius_voxels = v.get<int>();
      else if (key == "loss") p.loss = loss_from(v.get<std::string>());
      else if (key == "topk_percent") p.topk_percent = v.get<double>();
      else if (key == "epochs") p.epochs = v.get<int>();
      else if (key == "iterations_per_epoch") p.iterations_per_epoch = v.get<int>();
      else if (key == "lr") {
        for (const auto& [k, x] : v.items()) {
          if (k == "initial") p.lr.initial = x.get<double>();
          else if (k == "power") p.lr.power = x.get<double>();
          else if (k == "momentum") p.lr.momentum = x.get<double>();
          else if (k == "weight_decay") p.lr.weight_decay = x.get<double>();
          else throw ConfigError("unknown lr field '" + k + "'");
        }
      } else if (key == "oversample_foreground_fraction") p.oversample_foreground_fraction = v.get<double>();
      else if (key == "fold_count") p.fold_count = v.get<int>();
      else throw ConfigError("unknown plan field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed plan override: ") + e.what());
  }
}

Plan plan_from_json(const Json& j) {
  Plan p;
  apply_overrides(p, j);
  // A full document also carries pools explicitly; honour them even if listed after patch_size.
  if (j.contains("num_pool_per_axis")) p.num_pool_per_axis = triple<int>(j["num_pool_per_axis"], "num_pool_per_axis");
  p.validate();
  return p;
}

double learning_rate(const LrSchedule& lr, int epoch, int epochs) {
  const double frac = std::clamp(1.0 - static_cast<double>(epoch) / epochs, 0.0, 1.0);
  return lr.initial * std::pow(frac, lr.power);
}

}  // namespace nnlm
