#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codecpatch/binary_io.hpp"
#include "codecpatch/error.hpp"
#include "codecpatch/image.hpp"

namespace codecpatch {

inline constexpr int kDefaultPatchSize = 14;
inline constexpr int kDefaultGopLength = 32;

// Target frame geometry. A zero height/width keeps the native size, cropped
// down to the nearest patch multiple.
struct Geometry {
  int height = 224;
  int width = 224;
  int patch_size = kDefaultPatchSize;
};

struct RawClip {
  std::vector<Frame> frames;
  double fps = 30.0;
  std::string source_id;
  int patch_size = kDefaultPatchSize;

  int num_frames() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int grid_height() const { return height() / patch_size; }
  int grid_width() const { return width() / patch_size; }
  int patches_per_frame() const { return grid_height() * grid_width(); }
};

struct GopSegment {
  int start = 0;
  int length = 0;

  bool operator==(const GopSegment&) const = default;
};

// Contiguous GOP decomposition; the first frame of every segment is the I-frame.
struct GopPartition {
  std::vector<GopSegment> segments;
  int gop_length = kDefaultGopLength;

  int total_frames() const {
    int n = 0;
    for (const auto& s : segments) n += s.length;
    return n;
  }
  int i_frame_count() const { return static_cast<int>(segments.size()); }
  bool is_i_frame(int t) const {
    return std::any_of(segments.begin(), segments.end(), [t](const GopSegment& s) { return s.start == t; });
  }
  // Index of the segment containing frame t.
  int segment_of(int t) const {
    for (std::size_t n = 0; n < segments.size(); ++n) {
      if (t >= segments[n].start && t < segments[n].start + segments[n].length) return static_cast<int>(n);
    }
    throw InvariantError("frame " + std::to_string(t) + " outside GOP partition");
  }
  std::vector<int> p_frames() const {
    std::vector<int> out;
    for (const auto& s : segments) {
      for (int t = s.start + 1; t < s.start + s.length; ++t) out.push_back(t);
    }
    return out;
  }
};

inline GopPartition partition_gops(const RawClip& clip, int gop_length = kDefaultGopLength) {
  if (gop_length < 1) throw ConfigError("gop length must be >= 1");
  GopPartition gops;
  gops.gop_length = gop_length;
  for (int start = 0; start < clip.num_frames(); start += gop_length) {
    gops.segments.push_back({start, std::min(gop_length, clip.num_frames() - start)});
  }
  return gops;
}

// Size a frame is resized to before the center crop: the smallest
// aspect-preserving size covering the target in both dimensions.
inline std::pair<int, int> cover_size(int src_h, int src_w, int dst_h, int dst_w) {
  const double scale = std::max(static_cast<double>(dst_h) / src_h, static_cast<double>(dst_w) / src_w);
  const int h = std::max(dst_h, static_cast<int>(std::ceil(src_h * scale - 1e-9)));
  const int w = std::max(dst_w, static_cast<int>(std::ceil(src_w * scale - 1e-9)));
  return {h, w};
}

inline Frame normalize_geometry(const Frame& frame, const Geometry& geometry) {
  if (geometry.height == 0 || geometry.width == 0) {
    const int h = frame.height / geometry.patch_size * geometry.patch_size;
    const int w = frame.width / geometry.patch_size * geometry.patch_size;
    if (h == 0 || w == 0) throw ConfigError("frame smaller than one patch");
    return center_crop(frame, h, w);
  }
  const auto [rh, rw] = cover_size(frame.height, frame.width, geometry.height, geometry.width);
  return center_crop(resize_bilinear(frame, rh, rw), geometry.height, geometry.width);
}

inline void validate_geometry(const Geometry& geometry) {
  if (geometry.patch_size < 1) throw ConfigError("patch size must be >= 1");
  if (geometry.height < 0 || geometry.width < 0 || geometry.height % geometry.patch_size != 0 ||
      geometry.width % geometry.patch_size != 0) {
    throw ConfigError("target geometry " + std::to_string(geometry.height) + "x" + std::to_string(geometry.width) +
                      " is not a multiple of patch size " + std::to_string(geometry.patch_size));
  }
  if ((geometry.height == 0) != (geometry.width == 0)) throw ConfigError("height and width must both be set or both be 0");
}

namespace detail {

inline std::vector<Frame> read_frame_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("frame_", 0) == 0 && entry.path().extension() == ".ppm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_ppm(f));
  return frames;
}

inline std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Full-range BT.601 conversion with nearest-neighbour chroma upsampling.
inline std::vector<Frame> read_yuv420p(const std::filesystem::path& path, double& fps) {
  auto meta_path = path;
  meta_path.replace_extension(".meta.json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_text(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(meta_path.string() + ": " + e.what());
  }
  if (meta.value("pix_fmt", std::string{}) != "yuv420p") {
    throw IoError(meta_path.string() + ": unsupported pixel format " + meta.value("pix_fmt", std::string{"<none>"}));
  }
  const int width = meta.value("width", 0);
  const int height = meta.value("height", 0);
  const int count = meta.value("frames", 0);
  fps = meta.value("fps", 30.0);
  if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0) {
    throw IoError(meta_path.string() + ": yuv420p needs positive even dimensions");
  }
  const auto bytes = io::read_file(path);
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  const std::size_t chroma = luma / 4;
  const std::size_t frame_bytes = luma + 2 * chroma;
  if (count < 0 || bytes.size() != frame_bytes * static_cast<std::size_t>(count)) {
    throw IoError(path.string() + ": size does not match " + std::to_string(count) + " frames");
  }
  std::vector<Frame> frames;
  for (int t = 0; t < count; ++t) {
    const std::uint8_t* y_plane = bytes.data() + frame_bytes * t;
    const std::uint8_t* u_plane = y_plane + luma;
    const std::uint8_t* v_plane = u_plane + chroma;
    Frame f(height, width);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double Y = y_plane[static_cast<std::size_t>(y) * width + x];
        const std::size_t c = static_cast<std::size_t>(y / 2) * (width / 2) + x / 2;
        const double U = u_plane[c] - 128.0;
        const double V = v_plane[c] - 128.0;
        std::uint8_t* px = f.pixel(y, x);
        px[0] = clamp_byte(Y + 1.402 * V);
        px[1] = clamp_byte(Y - 0.344136 * U - 0.714136 * V);
        px[2] = clamp_byte(Y + 1.772 * U);
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace detail

// Loads a frame directory (frame_%05d.ppm), a single .ppm image, or a
// .yuv file with its .meta.json sidecar, then resizes and center-crops every
// frame onto the patch grid.
inline RawClip load_clip(const std::filesystem::path& path, const Geometry& geometry = {}) {
  validate_geometry(geometry);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw IoError("no such file: " + path.string());

  RawClip clip;
  clip.patch_size = geometry.patch_size;
  std::vector<Frame> frames;
  if (std::filesystem::is_directory(path)) {
    frames = detail::read_frame_directory(path);
    clip.source_id = path.filename().empty() ? path.parent_path().filename().string() : path.filename().string();
  } else if (path.extension() == ".ppm") {
    frames.push_back(read_ppm(path));
    clip.source_id = path.stem().string();
  } else if (path.extension() == ".yuv") {
    frames = detail::read_yuv420p(path, clip.fps);
    clip.source_id = path.stem().string();
  } else {
    throw IoError("unsupported container: " + path.string());
  }
  if (frames.empty()) throw IoError(path.string() + ": zero frames");
  for (const auto& f : frames) {
    if (f.height != frames.front().height || f.width != frames.front().width) {
      throw IoError(path.string() + ": frames differ in size");
    }
  }

  clip.frames.reserve(frames.size());
  for (const auto& f : frames) clip.frames.push_back(normalize_geometry(f, geometry));
  return clip;
}

}  // namespace codecpatch
