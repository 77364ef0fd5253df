#include "nnlm/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "nnlm/log.hpp"
#include "nnlm/resample.hpp"
#include "nnlm/volume_io.hpp"

namespace nnlm {

Volume3D normalize_intensity(const Volume3D& v, Normalization scheme, const NormalizationStats& stats) {
  Volume3D out = v;
  auto& d = out.storage();
  const std::size_t n = d.size();
  if (scheme == Normalization::ct_clip_zscore) {
    double sd = stats.std;
    if (!(sd > 0)) {
      log_warn("pooled intensity std is zero; dividing by 1");
      sd = 1.0;
    }
    const double lo = stats.clip_low, hi = stats.clip_high, mean = stats.mean;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<float>((std::clamp<double>(d[i], lo, hi) - mean) / sd);
    return out;
  }
  double sum = 0.0;
  for (float x : d) sum += x;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (float x : d) ss += (x - mean) * (x - mean);
  double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 0)) {
    log_warn("volume has zero intensity spread; dividing by 1");
    sd = 1.0;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<float>((d[i] - mean) / sd);
  return out;
}

Volume3D preprocess_image(const Volume3D& raw, const Plan& plan) {
  const Volume3D resampled = resample_volume(raw, plan.target_spacing, Interpolation::linear);
  return normalize_intensity(resampled, plan.normalization, plan.intensity);
}

PreprocessedCase preprocess_case(const CaseRecord& c, const Plan& plan) {
  plan.validate();
  PreprocessedCase out;
  out.case_id = c.case_id;
  out.image = preprocess_image(read_volume(c.image_path), plan);
  if (!c.landmarks) {
    out.labels.volume = LabelVolume(out.image.geometry(), 0);
    return out;
  }
  out.landmarks = *c.landmarks;
  out.landmarks.case_id = c.case_id;
  try {
    out.labels = encode_label_map(out.image.geometry(), out.landmarks, 1, plan.classes);
  } catch (const EncodingError& e) {
    throw PreprocessingError(std::string("case ") + c.case_id + ": " + e.what());
  }
  return out;
}

namespace {

fs::path image_file(const fs::path& dir, const std::string& id) { return dir / (id + "_image.nii.gz"); }
fs::path label_file(const fs::path& dir, const std::string& id) { return dir / (id + "_labels.nii.gz"); }
fs::path meta_file(const fs::path& dir, const std::string& id) { return dir / (id + ".json"); }

}  // namespace

void preprocess_dataset(const std::vector<CaseRecord>& cases, const Plan& plan, const fs::path& cache_dir,
                        bool overwrite) {
  fs::create_directories(cache_dir);
  std::vector<std::string> errors(cases.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const CaseRecord& c = cases[i];
    if (!overwrite && fs::exists(meta_file(cache_dir, c.case_id))) continue;
    try {
      const PreprocessedCase p = preprocess_case(c, plan);
      write_volume(p.image, image_file(cache_dir, c.case_id));
      write_volume(p.labels.volume, label_file(cache_dir, c.case_id));
      Json meta = landmarks_to_json(p.landmarks);
      Json values = Json::object();
      for (const auto& [name, v] : p.labels.label_values) values[name] = v;
      meta["label_values"] = std::move(values);
      // Written last: its presence marks a complete entry.
      write_json_file(meta_file(cache_dir, c.case_id), meta);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw PreprocessingError(e);
  }
}

PreprocessedCase load_preprocessed(const fs::path& cache_dir, const std::string& case_id) {
  PreprocessedCase p;
  p.case_id = case_id;
  const Json meta = read_json_file(meta_file(cache_dir, case_id));
  p.landmarks = landmarks_from_json(meta);
  p.image = read_volume(image_file(cache_dir, case_id));
  p.labels.volume = read_label_volume(label_file(cache_dir, case_id));
  for (const auto& [name, v] : meta.at("label_values").items())
    p.labels.label_values.emplace_back(name, v.get<std::uint16_t>());
  if (!p.image.geometry().same_grid(p.labels.volume.geometry(), 1e-4))
    throw IoError("cached image and labels of " + case_id + " are on different grids");
  return p;
}

std::vector<std::string> list_preprocessed(const fs::path& cache_dir) {
  std::vector<std::string> ids;
  if (!fs::is_directory(cache_dir)) return ids;
  for (const auto& e : fs::directory_iterator(cache_dir)) {
    const std::string name = e.path().filename().string();
    if (name.ends_with(".json")) ids.push_back(name.substr(0, name.size() - 5));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace nnlm
