#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace nnlm {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string read_text_file(const fs::path& path);

/// Writes through a sibling temp file then renames, so readers never see partial files.
void write_file_atomic(const fs::path& path, std::string_view bytes);

Json read_json_file(const fs::path& path);
/// Pretty-printed with a trailing newline; key order is insertion order.
void write_json_file(const fs::path& path, const Json& j);

/// 64-bit FNV-1a, rendered as 16 hex digits. Stable across platforms.
std::string fnv1a_hex(std::string_view bytes);

/// Case identifier derived from an image or landmark filename (strips .nii.gz, .nii, .raw, .json, ...).
std::string case_id_from_filename(const fs::path& path);

}  // namespace nnlm
