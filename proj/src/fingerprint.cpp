#include "nnlm/fingerprint.hpp"

#include <algorithm>
#include <cmath>

#include "nnlm/rng.hpp"
#include "nnlm/volume_io.hpp"

namespace nnlm {

void Fingerprint::validate() const {
  if (class_count < 1) throw ConfigError("fingerprint class count must be >= 1");
  if (intensity.p00_5 > intensity.p99_5) throw ConfigError("fingerprint percentiles out of order");
  if (shapes.size() != spacings.size() || shapes.size() != case_ids.size())
    throw ConfigError("fingerprint per-case arrays differ in length");
  if (shapes.empty()) throw ConfigError("fingerprint has no cases");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace

Fingerprint compute_fingerprint(const std::vector<CaseRecord>& cases, const DatasetInfo& info, std::uint64_t seed) {
  if (cases.empty()) throw ConfigError("fingerprint needs at least one training case");
  const std::size_t n = cases.size();
  Fingerprint fp;
  fp.seed = seed;
  fp.modality = info.modality;
  fp.class_count = static_cast<int>(info.classes.size());
  fp.case_ids.resize(n);
  fp.shapes.resize(n);
  fp.spacings.resize(n);
  fp.landmark_counts.resize(n);
  std::vector<std::vector<double>> samples(n);
  std::vector<std::string> errors(n);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < n; ++c) {
    try {
      const Volume3D img = read_volume(cases[c].image_path);
      fp.case_ids[c] = cases[c].case_id;
      fp.shapes[c] = img.dims();
      fp.spacings[c] = img.geometry().spacing;
      fp.landmark_counts[c] = cases[c].landmarks ? static_cast<int>(cases[c].landmarks->size()) : 0;
      const auto& data = img.storage();
      auto& s = samples[c];
      if (data.size() <= kMaxSamplesPerCase) {
        s.assign(data.begin(), data.end());
      } else {
        Rng rng = make_rng(seed, "fingerprint", {c});
        s.resize(kMaxSamplesPerCase);
        for (auto& v : s) v = data[uniform_index(rng, data.size())];
      }
    } catch (const Error& e) {
      errors[c] = "case " + cases[c].case_id + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw IoError(e);
  }

  std::vector<double> pooled;
  for (const auto& s : samples) pooled.insert(pooled.end(), s.begin(), s.end());
  auto [mean, sd] = mean_std(pooled);
  fp.intensity.mean = mean;
  fp.intensity.std = sd;
  fp.intensity.p00_5 = percentile(pooled, 0.5);
  fp.intensity.p99_5 = percentile(pooled, 99.5);
  for (auto& v : pooled) v = std::clamp(v, fp.intensity.p00_5, fp.intensity.p99_5);
  std::tie(fp.intensity.clipped_mean, fp.intensity.clipped_std) = mean_std(pooled);
  fp.validate();
  return fp;
}

Json fingerprint_to_json(const Fingerprint& fp) {
  Json j;
  j["case_ids"] = fp.case_ids;
  Json shapes = Json::array(), spacings = Json::array();
  for (std::size_t i = 0; i < fp.shapes.size(); ++i) {
    shapes.push_back({fp.shapes[i].x, fp.shapes[i].y, fp.shapes[i].z});
    spacings.push_back({fp.spacings[i][0], fp.spacings[i][1], fp.spacings[i][2]});
  }
  j["shapes"] = std::move(shapes);
  j["spacings"] = std::move(spacings);
  j["intensity"] = {{"mean", fp.intensity.mean},
                    {"std", fp.intensity.std},
                    {"percentile_00_5", fp.intensity.p00_5},
                    {"percentile_99_5", fp.intensity.p99_5},
                    {"clipped_mean", fp.intensity.clipped_mean},
                    {"clipped_std", fp.intensity.clipped_std}};
  j["modality"] = fp.modality;
  j["class_count"] = fp.class_count;
  j["landmark_counts"] = fp.landmark_counts;
  j["seed"] = fp.seed;
  return j;
}

Fingerprint fingerprint_from_json(const Json& j) {
  Fingerprint fp;
  try {
    fp.case_ids = j.at("case_ids").get<std::vector<std::string>>();
    for (const auto& s : j.at("shapes")) fp.shapes.push_back(Dims{s[0].get<int>(), s[1].get<int>(), s[2].get<int>()});
    for (const auto& s : j.at("spacings")) fp.spacings.emplace_back(s[0].get<double>(), s[1].get<double>(), s[2].get<double>());
    const auto& in = j.at("intensity");
    fp.intensity.mean = in.at("mean").get<double>();
    fp.intensity.std = in.at("std").get<double>();
    fp.intensity.p00_5 = in.at("percentile_00_5").get<double>();
    fp.intensity.p99_5 = in.at("percentile_99_5").get<double>();
    fp.intensity.clipped_mean = in.at("clipped_mean").get<double>();
    fp.intensity.clipped_std = in.at("clipped_std").get<double>();
    fp.modality = j.at("modality").get<std::string>();
    fp.class_count = j.at("class_count").get<int>();
    fp.landmark_counts = j.at("landmark_counts").get<std::vector<int>>();
    fp.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed fingerprint: ") + e.what());
  }
  fp.validate();
  return fp;
}

}  // namespace nnlm
