#include "nnlm/convert.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "nnlm/dataset.hpp"
#include "nnlm/error.hpp"
#include "nnlm/volume_io.hpp"

namespace nnlm {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, v);
  return ec == std::errc() && p == end;
}

struct Collector {
  LandmarkSet lm;
  std::vector<ConversionEvent>& log;
  bool flip;

  void add(const std::string& raw_name, const Vec3& p, int row) {
    const std::string name = trim(raw_name);
    if (name.empty()) {
      log.push_back({lm.case_id, "dropped", "row " + std::to_string(row) + ": empty name"});
      return;
    }
    if (name != raw_name) log.push_back({lm.case_id, "renamed", "'" + raw_name + "' -> '" + name + "'"});
    if (!p.allFinite()) {
      log.push_back({lm.case_id, "dropped", name + ": non-finite coordinate"});
      return;
    }
    if (lm.find(name)) {
      log.push_back({lm.case_id, "dropped", name + ": duplicate, first occurrence kept"});
      return;
    }
    lm.add(name, flip ? Vec3(-p[0], -p[1], p[2]) : p);
  }
};

void read_rows(const fs::path& path, Collector& c, bool fcsv) {
  std::istringstream in(read_text_file(path));
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (fcsv && t.find("CoordinateSystem") != std::string::npos)
        c.log.push_back({c.lm.case_id, "note", "file header '" + t + "' (axis flag decides conversion)"});
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() < 4) {
      c.log.push_back({c.lm.case_id, "dropped", "row " + std::to_string(row) + ": too few fields"});
      continue;
    }
    Vec3 p;
    const bool numeric = parse_double(f[1], p[0]) && parse_double(f[2], p[1]) && parse_double(f[3], p[2]);
    if (!numeric) {
      const bool header = row == 1 || (!fcsv && c.lm.empty());
      c.log.push_back({c.lm.case_id, header ? "skipped" : "dropped",
                       "row " + std::to_string(row) + (header ? ": header" : ": non-numeric coordinate")});
      continue;
    }
    std::string name = f[0];
    if (fcsv && f.size() > 11 && !trim(f[11]).empty()) name = f[11];
    c.add(name, p, row);
  }
}

Vec3 json_point(const Json& v) {
  if (!v.is_array() || v.size() != 3) return Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  Vec3 p;
  for (int a = 0; a < 3; ++a)
    p[a] = v[a].is_number() ? v[a].get<double>() : std::numeric_limits<double>::quiet_NaN();
  return p;
}

void read_json_points(const fs::path& path, Collector& c) {
  Json j = read_json_file(path);
  if (j.is_object() && j.contains("landmarks")) j = j["landmarks"];
  int row = 0;
  if (j.is_object()) {
    for (const auto& [name, v] : j.items()) c.add(name, json_point(v), ++row);
  } else if (j.is_array()) {
    for (const auto& e : j) {
      ++row;
      if (!e.is_object() || !e.contains("name")) {
        c.log.push_back({c.lm.case_id, "dropped", "entry " + std::to_string(row) + ": no name"});
        continue;
      }
      Json pos;
      for (const char* k : {"position_mm", "position", "coordinates"})
        if (e.contains(k)) {
          pos = e[k];
          break;
        }
      c.add(e["name"].get<std::string>(), json_point(pos), row);
    }
  } else {
    throw ConversionError("unrecognised coordinate JSON layout in " + path.string());
  }
}

std::string extension_for(PointFormat f) {
  switch (f) {
    case PointFormat::csv_points: return ".csv";
    case PointFormat::fcsv_points: return ".fcsv";
    case PointFormat::coordinate_json: return ".json";
  }
  return {};
}

}  // namespace

PointFormat parse_point_format(const std::string& s) {
  if (s == "csv_points") return PointFormat::csv_points;
  if (s == "fcsv_points") return PointFormat::fcsv_points;
  if (s == "coordinate_json") return PointFormat::coordinate_json;
  throw ConfigError("unknown point format '" + s + "' (csv_points, fcsv_points, coordinate_json)");
}

Json ConversionLog::to_json() const {
  Json ev = Json::array();
  for (const auto& e : events) ev.push_back({{"case_id", e.case_id}, {"action", e.action}, {"detail", e.detail}});
  return Json{{"cases", cases}, {"classes", classes}, {"events", ev}};
}

LandmarkSet read_point_file(const fs::path& path, PointFormat format, bool flip_ras_lps,
                            std::vector<ConversionEvent>& log) {
  Collector c{{}, log, flip_ras_lps};
  c.lm.case_id = case_id_from_filename(path);
  switch (format) {
    case PointFormat::csv_points: read_rows(path, c, false); break;
    case PointFormat::fcsv_points: read_rows(path, c, true); break;
    case PointFormat::coordinate_json: read_json_points(path, c); break;
  }
  return c.lm;
}

ConversionLog convert_dataset(const fs::path& input_dir, const fs::path& output_dir, const ConvertOptions& opt) {
  const fs::path img_dir = input_dir / "images", lm_dir = input_dir / "landmarks";
  if (!fs::is_directory(input_dir)) throw ConversionError("input directory not found: " + input_dir.string());
  std::map<std::string, fs::path> images, points;
  if (fs::is_directory(img_dir))
    for (const auto& e : fs::directory_iterator(img_dir))
      if (e.is_regular_file() && is_volume_file(e.path())) images[case_id_from_filename(e.path())] = e.path();
  const std::string ext = extension_for(opt.format);
  if (fs::is_directory(lm_dir))
    for (const auto& e : fs::directory_iterator(lm_dir))
      if (e.is_regular_file() && e.path().extension() == ext) points[case_id_from_filename(e.path())] = e.path();
  if (images.empty() && points.empty()) throw ConversionError("no images or " + ext + " files under " + input_dir.string());

  ConversionLog log;
  std::vector<LandmarkSet> sets;
  for (const auto& [id, img] : images) {
    auto it = points.find(id);
    if (it == points.end()) throw ConversionError("case " + id + " has no " + ext + " coordinate file");
    LandmarkSet lm = read_point_file(it->second, opt.format, opt.flip_ras_lps, log.events);
    if (lm.empty()) throw ConversionError("case " + id + " has no usable landmarks");
    sets.push_back(std::move(lm));
  }
  for (const auto& [id, p] : points)
    if (!images.count(id)) throw ConversionError("coordinate file without image: " + p.filename().string());

  // Class list: union in order of first appearance; every case must carry the full list.
  for (const auto& s : sets)
    for (const auto& n : s.names)
      if (std::find(log.classes.begin(), log.classes.end(), n) == log.classes.end()) log.classes.push_back(n);
  std::string diff;
  for (const auto& s : sets) {
    std::vector<std::string> missing;
    for (const auto& n : log.classes)
      if (!s.find(n)) missing.push_back(n);
    if (!missing.empty()) {
      diff += "\n  " + s.case_id + ": missing";
      for (const auto& m : missing) diff += " " + m;
    }
  }
  if (!diff.empty()) throw ConversionError("inconsistent class lists across cases:" + diff);

  fs::create_directories(output_dir / "imagesTr");
  fs::create_directories(output_dir / "landmarksTr");
  for (auto& s : sets) {
    const fs::path src = images.at(s.case_id);
    fs::path dst = output_dir / "imagesTr" / src.filename();
    fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
    if (src.extension() == ".raw") {
      fs::copy_file(fs::path(src.string() + ".txt"), fs::path(dst.string() + ".txt"), fs::copy_options::overwrite_existing);
    }
    // Store landmarks in class-list order.
    LandmarkSet ordered;
    ordered.case_id = s.case_id;
    for (const auto& n : log.classes) ordered.add(n, s.position(n));
    write_landmarks(ordered, output_dir / "landmarksTr" / (s.case_id + ".json"));
    log.cases.push_back(s.case_id);
  }
  DatasetInfo info;
  info.name = opt.dataset_name;
  info.modality = opt.modality;
  info.classes = log.classes;
  write_dataset_info(info, output_dir);
  write_json_file(output_dir / "conversion_log.json", log.to_json());
  return log;
}

}  // namespace nnlm
