#include "nnlm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "nnlm/error.hpp"

namespace nnlm {
namespace {

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

std::string threshold_key(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

}  // namespace

std::vector<double> radial_errors(const LandmarkSet& gt, const LandmarkSet& pred) {
  const std::set<std::string> a(gt.names.begin(), gt.names.end());
  const std::set<std::string> b(pred.names.begin(), pred.names.end());
  if (a != b || a.size() != gt.size() || b.size() != pred.size()) {
    std::vector<std::string> only_gt, only_pred;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_gt));
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(only_pred));
    std::string msg = "landmark names differ";
    if (!gt.case_id.empty()) msg += " for case " + gt.case_id;
    msg += ": only in ground truth [" + join(only_gt) + "], only in prediction [" + join(only_pred) + "]";
    if (only_gt.empty() && only_pred.empty()) msg += " (duplicate names)";
    throw EvaluationError(msg);
  }
  std::vector<double> out;
  out.reserve(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) out.push_back((gt.positions_mm[i] - pred.position(gt.names[i])).norm());
  return out;
}

std::vector<double> sdr(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw EvaluationError("no radial errors to score");
  std::vector<double> out;
  for (double t : thresholds) {
    if (!(t > 0.0)) throw EvaluationError("SDR thresholds must be positive");
    const auto hits = std::count_if(errors.begin(), errors.end(), [t](double e) { return e <= t; });
    out.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(errors.size()));
  }
  return out;
}

std::vector<double> biometry_error(const LandmarkSet& gt, const LandmarkSet& pred,
                                   std::span<const BiometryMeasure> spec) {
  std::vector<double> out;
  for (const auto& m : spec) {
    for (const LandmarkSet* s : {&gt, &pred}) {
      for (const auto& n : {m.a, m.b}) {
        if (!s->find(n))
          throw EvaluationError("biometry '" + m.name + "' references unknown landmark '" + n + "'" +
                                (s == &gt ? " in ground truth" : " in prediction"));
      }
    }
    const double lg = (gt.position(m.a) - gt.position(m.b)).norm();
    const double lp = (pred.position(m.a) - pred.position(m.b)).norm();
    out.push_back(std::abs(lp - lg));
  }
  return out;
}

CaseEvaluation evaluate_case(const LandmarkSet& gt, const LandmarkSet& pred, std::span<const BiometryMeasure> spec) {
  CaseEvaluation e;
  e.case_id = gt.case_id.empty() ? pred.case_id : gt.case_id;
  e.names = gt.names;
  e.errors = radial_errors(gt, pred);
  e.biometry = biometry_error(gt, pred, spec);
  return e;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

EvalReport aggregate_report(const std::vector<CaseEvaluation>& cases, std::span<const double> thresholds,
                            std::span<const BiometryMeasure> spec) {
  if (cases.empty()) throw EvaluationError("no cases to aggregate");
  EvalReport r;
  r.thresholds.assign(thresholds.begin(), thresholds.end());
  r.cases = cases;
  std::vector<double> all;
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> per_class;
  for (const auto& c : cases) {
    for (std::size_t i = 0; i < c.errors.size(); ++i) {
      all.push_back(c.errors[i]);
      auto [it, inserted] = per_class.try_emplace(c.names[i]);
      if (inserted) order.push_back(c.names[i]);
      it->second.push_back(c.errors[i]);
    }
  }
  std::tie(r.mre, r.std) = mean_std(all);
  r.sdr = sdr(all, thresholds);
  for (const auto& name : order) {
    const auto& v = per_class[name];
    ClassRow row;
    row.name = name;
    row.count = v.size();
    std::tie(row.mre, row.std) = mean_std(v);
    row.sdr = sdr(v, thresholds);
    r.classes.push_back(row);
  }
  for (std::size_t m = 0; m < spec.size(); ++m) {
    std::vector<double> v;
    for (const auto& c : cases)
      if (m < c.biometry.size()) v.push_back(c.biometry[m]);
    BiometryRow row;
    row.name = spec[m].name;
    std::tie(row.mean_abs_error, row.std) = mean_std(v);
    r.biometry.push_back(row);
  }
  return r;
}

Json EvalReport::to_json() const {
  Json j;
  j["unit"] = unit;
  j["thresholds"] = thresholds;
  j["mre"] = mre;
  j["std"] = std;
  Json s = Json::object();
  for (std::size_t i = 0; i < thresholds.size(); ++i) s[threshold_key(thresholds[i])] = sdr[i];
  j["sdr"] = s;
  Json rows = Json::array();
  for (const auto& c : classes) {
    Json row{{"name", c.name}, {"count", c.count}, {"mre", c.mre}, {"std", c.std}};
    Json cs = Json::object();
    for (std::size_t i = 0; i < thresholds.size(); ++i) cs[threshold_key(thresholds[i])] = c.sdr[i];
    row["sdr"] = cs;
    rows.push_back(row);
  }
  j["per_class"] = rows;
  Json bio = Json::array();
  for (const auto& b : biometry) bio.push_back({{"name", b.name}, {"mean_abs_error", b.mean_abs_error}, {"std", b.std}});
  j["biometry"] = bio;
  Json cs = Json::array();
  for (const auto& c : cases) {
    Json e = Json::object();
    for (std::size_t i = 0; i < c.names.size(); ++i) e[c.names[i]] = c.errors[i];
    Json entry{{"case_id", c.case_id}, {"errors", e}};
    if (!c.biometry.empty()) entry["biometry"] = c.biometry;
    cs.push_back(entry);
  }
  j["cases"] = cs;
  return j;
}

EvalReport evaluate_directories(const fs::path& gt_dir, const fs::path& pred_dir, std::span<const double> thresholds,
                                std::span<const BiometryMeasure> spec, std::optional<double> voxel_size) {
  if (!fs::is_directory(gt_dir)) throw IoError("ground-truth directory not found: " + gt_dir.string());
  if (!fs::is_directory(pred_dir)) throw IoError("prediction directory not found: " + pred_dir.string());
  if (voxel_size && !(*voxel_size > 0.0)) throw ConfigError("voxel size must be positive");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(gt_dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EvaluationError("no landmark files in " + gt_dir.string());
  std::vector<CaseEvaluation> cases;
  for (const auto& f : files) {
    const fs::path p = pred_dir / f.filename();
    if (!fs::exists(p)) throw EvaluationError("missing prediction for case " + case_id_from_filename(f));
    LandmarkSet gt = read_landmarks(f);
    if (gt.case_id.empty()) gt.case_id = case_id_from_filename(f);
    CaseEvaluation c = evaluate_case(gt, read_landmarks(p), spec);
    if (voxel_size) {
      for (auto& e : c.errors) e /= *voxel_size;
      for (auto& e : c.biometry) e /= *voxel_size;
    }
    cases.push_back(std::move(c));
  }
  EvalReport r = aggregate_report(cases, thresholds, spec);
  if (voxel_size) r.unit = "voxel";
  return r;
}

std::vector<BiometryMeasure> read_biometry_spec(const fs::path& path) {
  const Json j = read_json_file(path);
  const Json& list = j.is_object() && j.contains("biometry") ? j["biometry"] : j;
  if (!list.is_array()) throw ConfigError("biometry spec must be a list of [name, A, B]");
  std::vector<BiometryMeasure> out;
  for (const auto& e : list) {
    if (!e.is_array() || e.size() != 3) throw ConfigError("biometry entry must be [name, A, B]");
    out.push_back({e[0].get<std::string>(), e[1].get<std::string>(), e[2].get<std::string>()});
  }
  return out;
}

}  // namespace nnlm
