#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "codecpatch/binary_io.hpp"
#include "codecpatch/error.hpp"

namespace codecpatch {

// 8-bit interleaved RGB frame, row-major.
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  Frame() = default;
  Frame(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t* pixel(int y, int x) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int y, int x) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  bool operator==(const Frame&) const = default;
};

namespace detail {

// Reads one whitespace-delimited header integer, skipping '#' comments.
inline int read_ppm_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos, const std::string& source) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw IoError(source + ": malformed PPM header");
  long value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos++] - '0');
    if (value > (1L << 24)) throw IoError(source + ": PPM header value out of range");
  }
  return static_cast<int>(value);
}

}  // namespace detail

// Binary portable pixmap (P6), maxval 255.
inline Frame read_ppm(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  const std::string source = path.string();
  if (bytes.size() < 2 || bytes[0] != 'P') throw IoError(source + ": not a PPM file");
  if (bytes[1] != '6') {
    throw IoError(source + ": unsupported pixel format P" + std::string(1, static_cast<char>(bytes[1])));
  }
  std::size_t pos = 2;
  const int width = detail::read_ppm_int(bytes, pos, source);
  const int height = detail::read_ppm_int(bytes, pos, source);
  const int maxval = detail::read_ppm_int(bytes, pos, source);
  if (maxval != 255) throw IoError(source + ": unsupported pixel format (maxval " + std::to_string(maxval) + ")");
  if (width <= 0 || height <= 0) throw IoError(source + ": empty image");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError(source + ": malformed PPM header");
  ++pos;
  Frame frame(height, width);
  if (bytes.size() - pos < frame.rgb.size()) throw IoError(source + ": truncated pixel data");
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
            bytes.begin() + static_cast<std::ptrdiff_t>(pos + frame.rgb.size()), frame.rgb.begin());
  return frame;
}

inline std::string encode_ppm(const Frame& frame, const std::string& comment = {}) {
  std::string out = "P6\n";
  if (!comment.empty()) {
    std::string line;
    for (char c : comment) line += (c == '\n' ? ' ' : c);
    out += "# " + line + "\n";
  }
  out += std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  out.append(frame.rgb.begin(), frame.rgb.end());
  return out;
}

inline void write_ppm(const std::filesystem::path& path, const Frame& frame, const std::string& comment = {}) {
  io::write_text(path, encode_ppm(frame, comment));
}

// Bilinear resampling with half-pixel centers, edge-clamped.
inline Frame resize_bilinear(const Frame& src, int height, int width) {
  if (src.height == height && src.width == width) return src;
  Frame dst(height, width);
  const double sy = static_cast<double>(src.height) / height;
  const double sx = static_cast<double>(src.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.pixel(y0, x0)[c] * (1 - wx) + src.pixel(y0, x1)[c] * wx;
        const double bottom = src.pixel(y1, x0)[c] * (1 - wx) + src.pixel(y1, x1)[c] * wx;
        const double v = top * (1 - wy) + bottom * wy;
        dst.pixel(y, x)[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return dst;
}

inline Frame center_crop(const Frame& src, int height, int width) {
  if (height > src.height || width > src.width) throw ConfigError("crop larger than frame");
  if (height == src.height && width == src.width) return src;
  Frame dst(height, width);
  const int oy = (src.height - height) / 2;
  const int ox = (src.width - width) / 2;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = src.pixel(y + oy, ox);
    std::copy(row, row + static_cast<std::size_t>(width) * 3, dst.pixel(y, 0));
  }
  return dst;
}

}  // namespace codecpatch
