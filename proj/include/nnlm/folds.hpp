#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nnlm/io_util.hpp"

namespace nnlm {

/// splits[f] holds the validation cases of fold f.
using Splits = std::vector<std::vector<std::string>>;

/// Sorts, shuffles with the seed, then deals cases round-robin. Sizes differ by at most one.
Splits split_folds(std::vector<std::string> case_ids, int fold_count, std::uint64_t seed);

Json splits_to_json(const Splits& s);
Splits splits_from_json(const Json& j);
void write_splits(const Splits& s, const std::filesystem::path& path);
Splits read_splits(const std::filesystem::path& path);

/// Training cases of fold `fold` (all other folds); fold -1 means every case.
std::vector<std::string> training_cases(const Splits& s, int fold);

}  // namespace nnlm
