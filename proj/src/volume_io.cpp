#include "nnlm/volume_io.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "nnlm/io_util.hpp"

namespace nnlm {
namespace {

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
};

const Mat3 kRasToLps = Eigen::Vector3d(-1.0, -1.0, 1.0).asDiagonal();

bool ends_with(const std::string& s, std::string_view suffix) { return s.ends_with(suffix); }

bool is_nifti(const fs::path& p) {
  const std::string s = p.string();
  return ends_with(s, ".nii") || ends_with(s, ".nii.gz");
}

bool is_raw(const fs::path& p) { return ends_with(p.string(), ".raw"); }

fs::path raw_sidecar(const fs::path& p) {
  fs::path s = p;
  s += ".txt";
  return s;
}

std::vector<char> read_gz_all(const fs::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<char> out;
  std::vector<char> buf(1 << 20);
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      throw IoError("corrupt compressed stream in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
  if (!ends_with(path.string(), ".gz")) {
    write_file_atomic(path, std::string_view(bytes.data(), bytes.size()));
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  gzFile f = gzopen(tmp.string().c_str(), "wb6");
  if (!f) throw IoError("cannot write " + tmp.string());
  std::size_t off = 0;
  while (off < bytes.size()) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    if (gzwrite(f, bytes.data() + off, chunk) != static_cast<int>(chunk)) {
      gzclose(f);
      throw IoError("short write to " + tmp.string());
    }
    off += chunk;
  }
  if (gzclose(f) != Z_OK) throw IoError("cannot finish " + tmp.string());
  fs::rename(tmp, path);
}

template <class T>
T get(const char* base, int offset, bool swap) {
  T v;
  std::memcpy(&v, base + offset, sizeof(T));
  if (swap) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <class T>
void put(std::vector<char>& buf, int offset, T v) {
  std::memcpy(buf.data() + offset, &v, sizeof(T));
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

struct NiftiHeader {
  Geometry geometry;
  std::int16_t datatype = kFloat32;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::size_t data_offset = kVoxOffset;
  bool swap = false;
};

NiftiHeader parse_header(const std::vector<char>& bytes, const fs::path& path) {
  if (bytes.size() < kHeaderSize) throw IoError("truncated NIfTI header in " + path.string());
  const char* h = bytes.data();
  NiftiHeader out;
  const auto size_native = get<std::int32_t>(h, 0, false);
  if (size_native == kHeaderSize) {
    out.swap = false;
  } else if (get<std::int32_t>(h, 0, true) == kHeaderSize) {
    out.swap = true;
  } else {
    throw IoError("not a NIfTI-1 file: " + path.string());
  }
  const bool sw = out.swap;
  const int ndim = get<std::int16_t>(h, 40, sw);
  if (ndim < 1 || ndim > 7) throw IoError("bad dim[0] in " + path.string());
  std::array<int, 3> n{1, 1, 1};
  for (int a = 0; a < std::min(ndim, 3); ++a) n[a] = get<std::int16_t>(h, 42 + 2 * a, sw);
  for (int a = 3; a < ndim; ++a) {
    if (get<std::int16_t>(h, 42 + 2 * a, sw) > 1) throw IoError("only 3D volumes are supported: " + path.string());
  }
  out.datatype = get<std::int16_t>(h, 70, sw);
  std::array<float, 8> pixdim{};
  for (int a = 0; a < 8; ++a) pixdim[a] = get<float>(h, 76 + 4 * a, sw);
  out.data_offset = static_cast<std::size_t>(get<float>(h, 108, sw));
  out.scl_slope = get<float>(h, 112, sw);
  out.scl_inter = get<float>(h, 116, sw);
  const auto qform_code = get<std::int16_t>(h, 252, sw);
  const auto sform_code = get<std::int16_t>(h, 254, sw);

  Eigen::Matrix3d lin;
  Vec3 offset;
  Vec3 spacing(std::abs(pixdim[1]), std::abs(pixdim[2]), std::abs(pixdim[3]));
  for (int a = 0; a < 3; ++a) {
    if (!(spacing[a] > 0)) spacing[a] = 1.0;
  }
  if (sform_code > 0) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) lin(r, c) = get<float>(h, 280 + 16 * r + 4 * c, sw);
      offset[r] = get<float>(h, 280 + 16 * r + 12, sw);
    }
  } else if (qform_code > 0) {
    const double b = get<float>(h, 256, sw), c = get<float>(h, 260, sw), d = get<float>(h, 264, sw);
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    Mat3 r;
    r << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),  //
        2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),   //
        2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;
    const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;
    lin = r * Eigen::Vector3d(spacing[0], spacing[1], qfac * spacing[2]).asDiagonal();
    offset = Vec3(get<float>(h, 268, sw), get<float>(h, 272, sw), get<float>(h, 276, sw));
  } else {
    lin = spacing.asDiagonal();
    offset.setZero();
  }
  lin = kRasToLps * lin;
  offset = kRasToLps * offset;

  Geometry& g = out.geometry;
  g.dims = Dims{n[0], n[1], n[2]};
  for (int a = 0; a < 3; ++a) g.spacing[a] = lin.col(a).norm();
  if (!(g.spacing.minCoeff() > 0)) throw IoError("degenerate affine in " + path.string());
  Mat3 dir = lin;
  for (int a = 0; a < 3; ++a) dir.col(a) /= g.spacing[a];
  if ((dir.transpose() * dir - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-3)
    throw GeometryError("sheared affine is not supported: " + path.string());
  g.direction = orthonormalize(dir);
  g.origin = offset;
  g.validate();
  return out;
}

template <class Raw>
void convert_into(const char* src, std::size_t count, bool swap, float slope, float inter, std::vector<double>& dst) {
  dst.resize(count);
  const bool scale = slope != 0.0f && !(slope == 1.0f && inter == 0.0f);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = static_cast<double>(get<Raw>(src, static_cast<int>(0), swap && sizeof(Raw) > 1));
    dst[i] = scale ? v * slope + inter : v;
    src += sizeof(Raw);
  }
}

std::vector<double> decode_data(const std::vector<char>& bytes, const NiftiHeader& hdr, const fs::path& path) {
  const std::size_t count = hdr.geometry.dims.count();
  std::size_t width = 0;
  switch (hdr.datatype) {
    case kUint8: case kInt8: width = 1; break;
    case kInt16: case kUint16: width = 2; break;
    case kInt32: case kUint32: case kFloat32: width = 4; break;
    case kFloat64: width = 8; break;
    default: throw IoError("unsupported NIfTI datatype " + std::to_string(hdr.datatype) + " in " + path.string());
  }
  if (bytes.size() < hdr.data_offset + count * width) throw IoError("truncated NIfTI data in " + path.string());
  const char* src = bytes.data() + hdr.data_offset;
  std::vector<double> out;
  const bool sw = hdr.swap;
  switch (hdr.datatype) {
    case kUint8: convert_into<std::uint8_t>(src, count, sw, hdr.scl_slope, hdr.scl_inter, out); break;
    case kInt8: convert_into<std::int8_t>(src, count, sw, hdr.scl_slope, hdr.scl_inter, out); break;
    case kInt16: convert_into<std::int16_t>(src, count, sw, hdr.scl_slope, hdr.scl_inter, out); break;
    case kUint16: convert_into<std::uint16_t>(src, count, sw, hdr.scl_slope, hdr.scl_inter, out); break;
    case kInt32: convert_into<std::int32_t>(src, count, sw, hdr.scl_slope, hdr.scl_inter, out); break;
    case kUint32: convert_into<std::uint32_t>(src, count, sw, hdr.scl_slope, hdr.scl_inter, out); break;
    case kFloat32: convert_into<float>(src, count, sw, hdr.scl_slope, hdr.scl_inter, out); break;
    case kFloat64: convert_into<double>(src, count, sw, hdr.scl_slope, hdr.scl_inter, out); break;
    default: break;
  }
  return out;
}

std::vector<char> encode_header(const Geometry& g, std::int16_t datatype, std::int16_t bitpix) {
  std::vector<char> buf(kVoxOffset, 0);
  put<std::int32_t>(buf, 0, kHeaderSize);
  put<char>(buf, 38, 'r');
  put<std::int16_t>(buf, 40, 3);
  put<std::int16_t>(buf, 42, static_cast<std::int16_t>(g.dims.x));
  put<std::int16_t>(buf, 44, static_cast<std::int16_t>(g.dims.y));
  put<std::int16_t>(buf, 46, static_cast<std::int16_t>(g.dims.z));
  for (int a = 3; a < 7; ++a) put<std::int16_t>(buf, 42 + 2 * a, 1);
  put<std::int16_t>(buf, 70, datatype);
  put<std::int16_t>(buf, 72, bitpix);

  const Mat3 dir_ras = kRasToLps * g.direction;
  const Vec3 origin_ras = kRasToLps * g.origin;
  Mat3 rot = dir_ras;
  float qfac = 1.0f;
  if (rot.determinant() < 0) {
    rot.col(2) *= -1.0;
    qfac = -1.0f;
  }
  Eigen::Quaterniond q(rot);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  put<float>(buf, 76, qfac);
  for (int a = 0; a < 3; ++a) put<float>(buf, 80 + 4 * a, static_cast<float>(g.spacing[a]));
  put<float>(buf, 108, static_cast<float>(kVoxOffset));
  put<float>(buf, 112, 1.0f);
  put<float>(buf, 116, 0.0f);
  put<char>(buf, 123, 2);  // mm
  put<std::int16_t>(buf, 252, 1);
  put<std::int16_t>(buf, 254, 1);
  put<float>(buf, 256, static_cast<float>(q.x()));
  put<float>(buf, 260, static_cast<float>(q.y()));
  put<float>(buf, 264, static_cast<float>(q.z()));
  for (int a = 0; a < 3; ++a) put<float>(buf, 268 + 4 * a, static_cast<float>(origin_ras[a]));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) put<float>(buf, 280 + 16 * r + 4 * c, static_cast<float>(dir_ras(r, c) * g.spacing[c]));
    put<float>(buf, 280 + 16 * r + 12, static_cast<float>(origin_ras[r]));
  }
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  return buf;
}

Geometry read_raw_sidecar(const fs::path& path) {
  std::istringstream in(read_text_file(raw_sidecar(path)));
  Geometry g;
  std::string key;
  bool have_shape = false;
  while (in >> key) {
    if (key == "shape") {
      in >> g.dims.x >> g.dims.y >> g.dims.z;
      have_shape = true;
    } else if (key == "spacing") {
      in >> g.spacing[0] >> g.spacing[1] >> g.spacing[2];
    } else if (key == "origin") {
      in >> g.origin[0] >> g.origin[1] >> g.origin[2];
    } else if (key == "direction") {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) in >> g.direction(r, c);
    } else {
      throw IoError("unknown key '" + key + "' in " + raw_sidecar(path).string());
    }
    if (!in) throw IoError("malformed raw sidecar " + raw_sidecar(path).string());
  }
  if (!have_shape) throw IoError("raw sidecar lacks shape: " + raw_sidecar(path).string());
  g.validate();
  return g;
}

void write_raw(const Geometry& g, const std::vector<float>& values, const fs::path& path) {
  std::ostringstream s;
  s.precision(17);
  s << "shape " << g.dims.x << ' ' << g.dims.y << ' ' << g.dims.z << '\n';
  s << "spacing " << g.spacing[0] << ' ' << g.spacing[1] << ' ' << g.spacing[2] << '\n';
  s << "origin " << g.origin[0] << ' ' << g.origin[1] << ' ' << g.origin[2] << '\n';
  s << "direction";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) s << ' ' << g.direction(r, c);
  s << '\n';
  static_assert(std::endian::native == std::endian::little, "raw volumes are written little-endian");
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float)));
  write_file_atomic(raw_sidecar(path), s.str());
}

std::vector<double> read_values(const fs::path& path, Geometry& geometry) {
  if (is_raw(path)) {
    geometry = read_raw_sidecar(path);
    const std::string bytes = read_text_file(path);
    const std::size_t count = geometry.dims.count();
    if (bytes.size() != count * sizeof(float)) throw IoError("raw data size mismatch in " + path.string());
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
      out[i] = f;
    }
    return out;
  }
  if (!is_nifti(path)) throw IoError("unrecognised volume extension: " + path.string());
  const std::vector<char> bytes = read_gz_all(path);
  const NiftiHeader hdr = parse_header(bytes, path);
  geometry = hdr.geometry;
  return decode_data(bytes, hdr, path);
}

}  // namespace

bool is_volume_file(const fs::path& path) { return is_nifti(path) || is_raw(path); }

Geometry read_geometry(const fs::path& path) {
  if (is_raw(path)) return read_raw_sidecar(path);
  if (!is_nifti(path)) throw IoError("unrecognised volume extension: " + path.string());
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<char> head(kHeaderSize);
  const int n = gzread(f, head.data(), kHeaderSize);
  gzclose(f);
  if (n != kHeaderSize) throw IoError("truncated NIfTI header in " + path.string());
  return parse_header(head, path).geometry;
}

Volume3D read_volume(const fs::path& path) {
  Geometry g;
  const std::vector<double> values = read_values(path, g);
  std::vector<float> data(values.size());
  std::transform(values.begin(), values.end(), data.begin(), [](double v) { return static_cast<float>(v); });
  return Volume3D(g, std::move(data));
}

LabelVolume read_label_volume(const fs::path& path) {
  Geometry g;
  const std::vector<double> values = read_values(path, g);
  std::vector<std::uint16_t> data(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::nearbyint(values[i]);
    if (v < 0 || v > 65535) throw IoError("label value out of range in " + path.string());
    data[i] = static_cast<std::uint16_t>(v);
  }
  return LabelVolume(g, std::move(data));
}

void write_volume(const Volume3D& v, const fs::path& path) {
  if (is_raw(path)) {
    write_raw(v.geometry(), v.storage(), path);
    return;
  }
  if (!is_nifti(path)) throw IoError("unrecognised volume extension: " + path.string());
  std::vector<char> bytes = encode_header(v.geometry(), kFloat32, 32);
  const auto* p = reinterpret_cast<const char*>(v.storage().data());
  bytes.insert(bytes.end(), p, p + v.size() * sizeof(float));
  write_bytes(path, bytes);
}

void write_volume(const LabelVolume& v, const fs::path& path) {
  if (is_raw(path)) {
    std::vector<float> f(v.storage().begin(), v.storage().end());
    write_raw(v.geometry(), f, path);
    return;
  }
  if (!is_nifti(path)) throw IoError("unrecognised volume extension: " + path.string());
  std::vector<char> bytes = encode_header(v.geometry(), kUint16, 16);
  const auto* p = reinterpret_cast<const char*>(v.storage().data());
  bytes.insert(bytes.end(), p, p + v.size() * sizeof(std::uint16_t));
  write_bytes(path, bytes);
}

}  // namespace nnlm
