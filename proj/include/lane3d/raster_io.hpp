#pragma once

// Binary rasters: 8-bit PPM (P6) color images and the DPTH depth format
// ("DPTH", u16 width, u16 height, then width*height little-endian float32,
// row-major; invalid pixels are written as 0).

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "lane3d/camera.hpp"
#include "lane3d/error.hpp"
#include "lane3d/image.hpp"

namespace lane3d {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
}

inline std::string encode_ppm(const Image& img) {
  detail::require(img.channels() == 3, "encode_ppm: image must have 3 channels");
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.data().size());
  for (float v : img.data()) out.push_back(static_cast<char>(to_byte(v)));
  return out;
}

inline Image decode_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (next_token() != "P6") throw ParseError("ppm: expected P6 magic");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw ParseError("ppm: malformed header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw ParseError("ppm: only 8-bit images with positive size are supported");
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < pos + n) throw ParseError("ppm: truncated pixel data");
  Image img(w, h, 3);
  for (std::size_t i = 0; i < n; ++i)
    img.data()[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i])) / 255.0f;
  return img;
}

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline std::uint16_t get_u16(const std::string& in, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(in[at]) |
                                    (static_cast<unsigned char>(in[at + 1]) << 8));
}

}  // namespace detail

inline std::string encode_depth(const DepthMap& depth) {
  detail::require(depth.width() <= 0xffff && depth.height() <= 0xffff, "encode_depth: image too large");
  std::string out = "DPTH";
  detail::put_u16(out, static_cast<std::uint16_t>(depth.width()));
  detail::put_u16(out, static_cast<std::uint16_t>(depth.height()));
  out.reserve(out.size() + depth.values().size() * 4);
  for (double d : depth.values()) {
    const float f = depth.range().contains(d) ? static_cast<float>(d) : 0.0f;
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  return out;
}

inline DepthMap decode_depth(const std::string& bytes, DepthRange range = {}) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "DPTH") != 0) throw ParseError("depth: expected DPTH header");
  const int w = detail::get_u16(bytes, 4);
  const int h = detail::get_u16(bytes, 6);
  if (w == 0 || h == 0) throw ParseError("depth: zero-sized raster");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 8 + 4 * n) throw ParseError("depth: payload size does not match header");
  DepthMap depth(w, h, 0.0, range);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[8 + 4 * i + b])) << (8 * b);
    depth.values()[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return depth;
}

}  // namespace lane3d
