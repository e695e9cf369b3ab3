// Copyright 2026 The zacn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// File formats.
//
//   depth   16-bit binary PGM (P5, maxval 65535, big-endian, unit_scale m per count)
//           or grayscale PFM (Pf, float32, rows bottom to top, meters)
//   rgb     binary PPM (P6, maxval 255)
//   ZOFF    "ZOFF" u32 version=1 u32 channels u32 h1 u32 w1, f32 payload
//   ZTEN    "ZTEN" u32 version=1 u32 rank u32 dims[rank], f32 payload
//   text    key=value lines, '#' starts a comment
//
// Multi-byte values in ZOFF, ZTEN, and PFM (negative scale) are little-endian.

#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "zacn/camera.hpp"
#include "zacn/depth_map.hpp"
#include "zacn/errors.hpp"
#include "zacn/offset_engine.hpp"
#include "zacn/tensor.hpp"

namespace zacn::io {

inline constexpr std::uint32_t kContainerVersion = 1;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to '" + path.string() + "'");
}

namespace detail {

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(what_ + ": " + msg, pos_); }

  std::string_view take(std::size_t n) {
    if (remaining() < n) {
      fail("truncated, need " + std::to_string(n) + " more bytes, have " + std::to_string(remaining()));
    }
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32le() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }

  float f32le() { return std::bit_cast<float>(u32le()); }

  std::uint16_t u16be() {
    auto s = take(2);
    return static_cast<std::uint16_t>((static_cast<unsigned char>(s[0]) << 8) | static_cast<unsigned char>(s[1]));
  }

  /// Skips whitespace and '#' comments between header tokens.
  void skip_blank() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  /// Next whitespace-delimited header token.
  std::string token() {
    skip_blank();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) fail("unexpected end of header");
    return std::string(bytes_.substr(start, pos_ - start));
  }

  std::size_t header_uint() {
    skip_blank();
    const std::size_t at = pos_;
    const std::string t = token();
    std::size_t v = 0;
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw FormatError(what_ + ": bad header number '" + t + "'", at);
      v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    return v;
  }

  /// The single whitespace byte that ends a PNM header.
  void header_end() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("missing whitespace after header");
    }
    ++pos_;
  }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void put_f32le(std::string& out, float v) { put_u32le(out, std::bit_cast<std::uint32_t>(v)); }

inline std::string_view magic_of(std::string_view bytes) { return bytes.substr(0, std::min<std::size_t>(2, bytes.size())); }

}  // namespace detail

// ---- depth ---------------------------------------------------------------

inline DepthMap parse_pgm16(std::string_view bytes, double unit_scale, const std::string& what = "PGM") {
  detail::ByteReader r(bytes, what);
  if (r.take(2) != "P5") r.fail("expected P5 magic");
  const std::size_t width = r.header_uint();
  const std::size_t height = r.header_uint();
  r.skip_blank();
  const std::size_t maxval_at = r.pos();
  const std::size_t maxval = r.header_uint();
  if (maxval != 65535) throw FormatError(what + ": maxval must be 65535, got " + std::to_string(maxval), maxval_at);
  r.header_end();
  if (width == 0 || height == 0) r.fail("empty image");
  std::vector<double> values(width * height);
  for (auto& v : values) {
    const std::uint16_t raw = r.u16be();
    v = raw == 0 ? 0.0 : static_cast<double>(raw) * unit_scale;
  }
  return DepthMap(height, width, std::move(values));
}

inline DepthMap parse_pfm(std::string_view bytes, const std::string& what = "PFM") {
  detail::ByteReader r(bytes, what);
  if (r.take(2) != "Pf") r.fail("expected Pf magic (grayscale PFM)");
  const std::size_t width = r.header_uint();
  const std::size_t height = r.header_uint();
  r.skip_blank();
  const std::size_t scale_at = r.pos();
  const std::string scale_tok = r.token();
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw FormatError(what + ": bad scale '" + scale_tok + "'", scale_at);
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError(what + ": scale must be nonzero", scale_at);
  r.header_end();
  if (width == 0 || height == 0) r.fail("empty image");
  const bool little = scale < 0.0;
  std::vector<double> values(width * height);
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t dst_row = height - 1 - row;
    for (std::size_t col = 0; col < width; ++col) {
      std::uint32_t bits = r.u32le();
      if (!little) bits = __builtin_bswap32(bits);
      values[dst_row * width + col] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return DepthMap(height, width, std::move(values));
}

/// Depth map from a 16-bit PGM (counts times `unit_scale`, 0 = missing) or a PFM (meters).
inline DepthMap load_depth(const std::filesystem::path& path, double unit_scale = 0.001) {
  const std::string bytes = read_file(path);
  const std::string what = path.string();
  if (bytes.empty()) throw FormatError(what + ": empty file", 0);
  const auto magic = detail::magic_of(bytes);
  if (magic == "P5") return parse_pgm16(bytes, unit_scale, what);
  if (magic == "Pf") return parse_pfm(bytes, what);
  throw FormatError(what + ": unknown depth format magic", 0);
}

inline std::string encode_pgm16(const DepthMap& depth, double unit_scale = 0.001) {
  std::string out = "P5\n" + std::to_string(depth.width()) + " " + std::to_string(depth.height()) + "\n65535\n";
  for (double z : depth.values()) {
    long count = is_valid_depth(z) ? std::lround(z / unit_scale) : 0;
    count = std::clamp(count, 0L, 65535L);
    out.push_back(static_cast<char>((count >> 8) & 0xff));
    out.push_back(static_cast<char>(count & 0xff));
  }
  return out;
}

inline std::string encode_pfm(const DepthMap& depth) {
  std::string out = "Pf\n" + std::to_string(depth.width()) + " " + std::to_string(depth.height()) + "\n-1.0\n";
  for (std::size_t row = depth.height(); row-- > 0;) {
    for (std::size_t col = 0; col < depth.width(); ++col) {
      detail::put_f32le(out, static_cast<float>(depth.at(row, col)));
    }
  }
  return out;
}

inline void save_depth_pgm(const std::filesystem::path& path, const DepthMap& depth, double unit_scale = 0.001) {
  write_file(path, encode_pgm16(depth, unit_scale));
}
inline void save_depth_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  write_file(path, encode_pfm(depth));
}

// ---- rgb -----------------------------------------------------------------

inline Tensor parse_ppm(std::string_view bytes, const std::string& what = "PPM") {
  detail::ByteReader r(bytes, what);
  if (bytes.empty()) r.fail("empty file");
  if (r.take(2) != "P6") r.fail("expected P6 magic");
  const std::size_t width = r.header_uint();
  const std::size_t height = r.header_uint();
  r.skip_blank();
  const std::size_t maxval_at = r.pos();
  const std::size_t maxval = r.header_uint();
  if (maxval != 255) throw FormatError(what + ": maxval must be 255, got " + std::to_string(maxval), maxval_at);
  r.header_end();
  if (width == 0 || height == 0) r.fail("empty image");
  Tensor rgb({3, height, width});
  const auto payload = r.take(3 * width * height);
  for (std::size_t k = 0; k < width * height; ++k) {
    for (std::size_t c = 0; c < 3; ++c) {
      rgb[c * width * height + k] = static_cast<unsigned char>(payload[3 * k + c]) / 255.0;
    }
  }
  return rgb;
}

inline Tensor load_rgb(const std::filesystem::path& path) { return parse_ppm(read_file(path), path.string()); }

inline std::string encode_ppm(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ShapeError("rgb image must be (3, H, W), got " + shape_string(rgb.shape()));
  const std::size_t h = rgb.dim(1);
  const std::size_t w = rgb.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + 3 * w * h);
  for (std::size_t k = 0; k < w * h; ++k) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(rgb[c * w * h + k], 0.0, 1.0);
      out.push_back(static_cast<char>(std::lround(v * 255.0)));
    }
  }
  return out;
}

inline void save_rgb(const std::filesystem::path& path, const Tensor& rgb) { write_file(path, encode_ppm(rgb)); }

// ---- ZOFF ----------------------------------------------------------------

inline std::string encode_offsets(const OffsetField& field) {
  std::string out = "ZOFF";
  detail::put_u32le(out, kContainerVersion);
  detail::put_u32le(out, static_cast<std::uint32_t>(field.channels));
  detail::put_u32le(out, static_cast<std::uint32_t>(field.height));
  detail::put_u32le(out, static_cast<std::uint32_t>(field.width));
  for (float v : field.values) detail::put_f32le(out, v);
  return out;
}

/// Parses a ZOFF buffer; with `spec` the channel count is checked against 2*N*N.
inline OffsetField parse_offsets(std::string_view bytes, std::optional<ConvSpec> spec = std::nullopt,
                                 const std::string& what = "ZOFF") {
  detail::ByteReader r(bytes, what);
  if (r.take(4) != "ZOFF") throw FormatError(what + ": bad magic, expected ZOFF", 0);
  const std::uint32_t version = r.u32le();
  if (version != kContainerVersion) {
    throw UnsupportedVersionError(what + ": unsupported ZOFF version " + std::to_string(version), 4);
  }
  const std::size_t channels = r.u32le();
  const std::size_t height = r.u32le();
  const std::size_t width = r.u32le();
  if (channels % 2 != 0) throw FormatError(what + ": odd channel count " + std::to_string(channels), 8);
  OffsetField field(channels, height, width);
  if (r.remaining() != 4 * field.values.size()) {
    r.fail("payload is " + std::to_string(r.remaining()) + " bytes, expected " +
           std::to_string(4 * field.values.size()));
  }
  for (auto& v : field.values) v = r.f32le();
  if (spec) check_offsets_match(field, *spec);
  return field;
}

inline void save_offsets(const std::filesystem::path& path, const OffsetField& field) {
  write_file(path, encode_offsets(field));
}
inline OffsetField load_offsets(const std::filesystem::path& path, std::optional<ConvSpec> spec = std::nullopt) {
  return parse_offsets(read_file(path), spec, path.string());
}

// ---- ZTEN ----------------------------------------------------------------

template <typename T>
std::string encode_tensor(const BasicTensor<T>& t) {
  std::string out = "ZTEN";
  detail::put_u32le(out, kContainerVersion);
  detail::put_u32le(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) detail::put_u32le(out, static_cast<std::uint32_t>(d));
  for (auto v : t.values()) detail::put_f32le(out, static_cast<float>(v));
  return out;
}

inline TensorF parse_tensor(std::string_view bytes, const std::string& what = "ZTEN") {
  detail::ByteReader r(bytes, what);
  if (r.take(4) != "ZTEN") throw FormatError(what + ": bad magic, expected ZTEN", 0);
  const std::uint32_t version = r.u32le();
  if (version != kContainerVersion) {
    throw UnsupportedVersionError(what + ": unsupported ZTEN version " + std::to_string(version), 4);
  }
  const std::uint32_t rank = r.u32le();
  Shape shape(rank);
  for (auto& d : shape) d = r.u32le();
  const std::size_t n = shape_volume(shape);
  if (r.remaining() != 4 * n) {
    r.fail("payload is " + std::to_string(r.remaining()) + " bytes, expected " + std::to_string(4 * n));
  }
  std::vector<float> values(n);
  for (auto& v : values) v = r.f32le();
  return TensorF(std::move(shape), std::move(values));
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const BasicTensor<T>& t) {
  write_file(path, encode_tensor(t));
}
inline TensorF load_tensor(const std::filesystem::path& path) { return parse_tensor(read_file(path), path.string()); }

// ---- key=value text ------------------------------------------------------

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline KeyValues parse_key_values(std::string_view text, const std::string& what = "key=value") {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (!t.empty()) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw FormatError(what + ": line " + std::to_string(line_no) + " is not key=value", start);
      }
      const std::string key = trim(std::string_view(t).substr(0, eq));
      if (key.empty()) throw FormatError(what + ": empty key on line " + std::to_string(line_no), start);
      if (kv.contains(key)) throw FormatError(what + ": duplicate key '" + key + "'", start);
      kv[key] = trim(std::string_view(t).substr(eq + 1));
    }
    start = end + 1;
  }
  return kv;
}

inline KeyValues load_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_file(path), path.string());
}

inline double parse_double(const std::string& value, const std::string& key, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw FormatError(what + ": '" + key + "' is not a number: '" + value + "'");
  return v;
}

inline CameraIntrinsics parse_intrinsics(std::string_view text, const std::string& what = "intrinsics") {
  const KeyValues kv = parse_key_values(text, what);
  for (const auto& [key, _] : kv) {
    if (key != "fu" && key != "fv" && key != "cu" && key != "cv") {
      throw FormatError(what + ": unknown key '" + key + "'");
    }
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(what + ": missing '" + std::string(key) + "'");
    return parse_double(it->second, key, what);
  };
  CameraIntrinsics k{get("fu"), get("fv"), get("cu"), get("cv")};
  if (!k.valid()) throw DomainError(what + ": intrinsics need finite fu > 0, fv > 0, cu, cv");
  return k;
}

inline CameraIntrinsics load_intrinsics(const std::filesystem::path& path) {
  return parse_intrinsics(read_file(path), path.string());
}

/// Shortest decimal text that reads back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string encode_intrinsics(const CameraIntrinsics& k) {
  return "fu=" + format_double(k.fu) + "\nfv=" + format_double(k.fv) + "\ncu=" + format_double(k.cu) +
         "\ncv=" + format_double(k.cv) + "\n";
}

inline void save_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k) {
  write_file(path, encode_intrinsics(k));
}

}  // namespace zacn::io
