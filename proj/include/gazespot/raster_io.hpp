#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gazespot/error.hpp"
#include "gazespot/raster.hpp"

namespace gazespot {

namespace detail {

inline void put_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

inline float get_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path);
}

}  // namespace detail

// "RSTR1 <width> <height>\n" followed by width*height little-endian float32,
// row-major.
inline void write_rstr(const Raster& r, const std::string& path) {
  std::string bytes = "RSTR1 " + std::to_string(r.width) + " " + std::to_string(r.height) + "\n";
  bytes.reserve(bytes.size() + r.size() * 4);
  for (double v : r.values) detail::put_f32_le(bytes, static_cast<float>(v));
  detail::write_file_bytes(path, bytes);
}

inline Raster read_rstr(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  const std::size_t eol = bytes.find('\n');
  if (eol == std::string::npos) throw DataError(path + ": missing RSTR1 header");
  int w = 0, h = 0;
  char magic[8] = {};
  if (std::sscanf(bytes.substr(0, eol).c_str(), "%6s %d %d", magic, &w, &h) != 3 ||
      std::string(magic) != "RSTR1" || w < 1 || h < 1)
    throw DataError(path + ": bad RSTR1 header");
  const std::size_t need = static_cast<std::size_t>(w) * h * 4;
  if (bytes.size() - eol - 1 != need) throw DataError(path + ": RSTR1 payload size mismatch");
  Raster r(w, h);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + eol + 1);
  for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = detail::get_f32_le(p + 4 * i);
  return r;
}

// 8-bit binary PGM preview, min-max scaled to 0..255.
inline void write_pgm(const Raster& r, const std::string& path) {
  const Raster n = normalize_minmax(r);
  std::string bytes =
      "P5\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  for (double v : n.values)
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  detail::write_file_bytes(path, bytes);
}

namespace detail {

// PNM header token reader; skips whitespace and '#' comments.
inline std::size_t next_pnm_token(const std::string& b, std::size_t pos, std::string& tok) {
  while (pos < b.size()) {
    if (std::isspace(static_cast<unsigned char>(b[pos]))) {
      ++pos;
    } else if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  tok.clear();
  while (pos < b.size() && !std::isspace(static_cast<unsigned char>(b[pos]))) tok += b[pos++];
  return pos;
}

}  // namespace detail

// Binary PPM (P6), maxval 255. Channel intensities map through round(v*255).
inline void write_ppm(const RgbImage& img, const std::string& path) {
  std::string bytes =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.channel[c].at(x, y), 0.0, 1.0);
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
  detail::write_file_bytes(path, bytes);
}

inline RgbImage read_ppm(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::string tok;
  std::size_t pos = detail::next_pnm_token(bytes, 0, tok);
  if (tok != "P6") throw DataError(path + ": not a binary PPM (P6)");
  pos = detail::next_pnm_token(bytes, pos, tok);
  const int w = std::atoi(tok.c_str());
  pos = detail::next_pnm_token(bytes, pos, tok);
  const int h = std::atoi(tok.c_str());
  pos = detail::next_pnm_token(bytes, pos, tok);
  const int maxval = std::atoi(tok.c_str());
  if (w < 1 || h < 1 || maxval != 255) throw DataError(path + ": unsupported PPM header");
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - pos < need) throw DataError(path + ": truncated PPM payload");
  RgbImage img(w, h);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.channel[c].at(x, y) = *p++ / 255.0;
  return img;
}

}  // namespace gazespot
