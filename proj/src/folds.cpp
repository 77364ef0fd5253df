#include "nnlm/folds.hpp"

#include <algorithm>

#include "nnlm/error.hpp"
#include "nnlm/rng.hpp"

namespace nnlm {

Splits split_folds(std::vector<std::string> case_ids, int fold_count, std::uint64_t seed) {
  if (fold_count < 1) throw ConfigError("fold count must be at least 1");
  if (static_cast<std::size_t>(fold_count) > case_ids.size())
    throw ConfigError("fold count " + std::to_string(fold_count) + " exceeds case count " +
                      std::to_string(case_ids.size()));
  std::sort(case_ids.begin(), case_ids.end());
  Rng rng = make_rng(seed, "folds");
  for (std::size_t i = case_ids.size(); i > 1; --i) std::swap(case_ids[i - 1], case_ids[uniform_index(rng, i)]);
  Splits s(fold_count);
  for (std::size_t i = 0; i < case_ids.size(); ++i) s[i % fold_count].push_back(case_ids[i]);
  return s;
}

Json splits_to_json(const Splits& s) {
  Json j = Json::object();
  for (std::size_t f = 0; f < s.size(); ++f) j["fold_" + std::to_string(f)] = s[f];
  return j;
}

Splits splits_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("splits must be an object of fold_i lists");
  Splits s(j.size());
  for (const auto& [key, val] : j.items()) {
    if (key.rfind("fold_", 0) != 0) throw ConfigError("unexpected splits key: " + key);
    std::size_t f = 0;
    try {
      f = std::stoul(key.substr(5));
    } catch (const std::exception&) {
      throw ConfigError("unexpected splits key: " + key);
    }
    if (f >= s.size()) throw ConfigError("splits folds are not numbered 0..n-1");
    s[f] = val.get<std::vector<std::string>>();
  }
  return s;
}

void write_splits(const Splits& s, const fs::path& path) { write_json_file(path, splits_to_json(s)); }

Splits read_splits(const fs::path& path) { return splits_from_json(read_json_file(path)); }

std::vector<std::string> training_cases(const Splits& s, int fold) {
  if (fold >= static_cast<int>(s.size())) throw ConfigError("fold " + std::to_string(fold) + " does not exist");
  std::vector<std::string> out;
  for (int f = 0; f < static_cast<int>(s.size()); ++f)
    if (f != fold) out.insert(out.end(), s[f].begin(), s[f].end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace nnlm
