#pragma once

// Synthetic clips with known motion for tests.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "codecpatch/image.hpp"
#include "codecpatch/ingest.hpp"
#include "codecpatch/motion.hpp"
#include "codecpatch/random.hpp"
#include "codecpatch/saliency.hpp"
#include "codecpatch/signals_io.hpp"

namespace synth {

using namespace codecpatch;

inline Frame noise_frame(int h, int w, Rng& rng) {
  Frame f(h, w);
  for (auto& v : f.rgb) v = static_cast<std::uint8_t>(uniform_index(rng, 256));
  return f;
}

inline Frame flat_frame(int h, int w, std::uint8_t value) {
  Frame f(h, w);
  std::fill(f.rgb.begin(), f.rgb.end(), value);
  return f;
}

// out(y, x) = src(y + dy, x + dx), edge-clamped: matching `src` as reference
// yields vector (dy, dx).
inline Frame shifted(const Frame& src, int dy, int dx) {
  Frame out(src.height, src.width);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const auto* p = src.pixel(std::clamp(y + dy, 0, src.height - 1), std::clamp(x + dx, 0, src.width - 1));
      std::copy(p, p + 3, out.pixel(y, x));
    }
  }
  return out;
}

struct Rect {
  int y = 0;
  int x = 0;
  int size = 0;
};

// A textured square moving at constant velocity over a static noise background.
struct MovingSquare {
  RawClip clip;
  std::vector<Rect> squares;  // per frame
  int vy = 0;
  int vx = 0;
};

inline MovingSquare moving_square(int frames, int h, int w, int size, int vy, int vx, std::uint64_t seed,
                                  int patch_size = 14) {
  Rng rng(seed);
  const Frame background = noise_frame(h, w, rng);
  const Frame texture = noise_frame(size, size, rng);
  MovingSquare out;
  out.vy = vy;
  out.vx = vx;
  out.clip.source_id = "square_" + std::to_string(seed);
  out.clip.patch_size = patch_size;
  // Start so that the whole trajectory stays inside the frame.
  const int span_y = vy * (frames - 1);
  const int span_x = vx * (frames - 1);
  if (std::abs(span_y) > h - size || std::abs(span_x) > w - size) std::abort();
  const int y0 = (h - size - std::abs(span_y)) / 2 + std::max(0, -span_y);
  const int x0 = (w - size - std::abs(span_x)) / 2 + std::max(0, -span_x);
  for (int t = 0; t < frames; ++t) {
    const Rect r{y0 + vy * t, x0 + vx * t, size};
    Frame f = background;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) std::copy(texture.pixel(y, x), texture.pixel(y, x) + 3, f.pixel(r.y + y, r.x + x));
    }
    out.squares.push_back(r);
    out.clip.frames.push_back(std::move(f));
  }
  return out;
}

// Patches touched by the square in frame t or t-1.
inline std::set<PatchCoord> footprint(const MovingSquare& m, int t) {
  std::set<PatchCoord> out;
  const int p = m.clip.patch_size;
  for (int f : {t - 1, t}) {
    const Rect& r = m.squares[static_cast<std::size_t>(f)];
    for (int gy = r.y / p; gy <= (r.y + r.size - 1) / p; ++gy) {
      for (int gx = r.x / p; gx <= (r.x + r.size - 1) / p; ++gx) {
        out.insert({static_cast<std::uint16_t>(gy), static_cast<std::uint16_t>(gx)});
      }
    }
  }
  return out;
}

inline bool within_dilated(const std::set<PatchCoord>& fp, PatchCoord c, int margin = 1) {
  for (const auto& f : fp) {
    if (std::abs(int{f.y} - int{c.y}) <= margin && std::abs(int{f.x} - int{c.x}) <= margin) return true;
  }
  return false;
}

// Codec-style signals from the known trajectory: blocks overlapping the
// square carry the true vector, all other blocks zero.
inline ClipSignals ground_truth_signals(const MovingSquare& m, const GopPartition& gops, int block_size) {
  ClipSignals out;
  const int h = m.clip.height();
  const int w = m.clip.width();
  for (int t : gops.p_frames()) {
    MotionField field;
    field.height = h;
    field.width = w;
    field.block_size = block_size;
    field.blocks_y = block_grid_extent(h, block_size);
    field.blocks_x = block_grid_extent(w, block_size);
    field.frame_index = static_cast<std::uint32_t>(t);
    field.reference_index = static_cast<std::uint32_t>(t - 1);
    field.vectors.assign(static_cast<std::size_t>(field.blocks_y) * field.blocks_x, {});
    const Rect& r = m.squares[static_cast<std::size_t>(t)];
    for (int by = r.y / block_size; by <= (r.y + r.size - 1) / block_size; ++by) {
      for (int bx = r.x / block_size; bx <= (r.x + r.size - 1) / block_size; ++bx) {
        field.vectors[static_cast<std::size_t>(by) * field.blocks_x + bx] = {static_cast<std::int16_t>(-m.vy),
                                                                             static_cast<std::int16_t>(-m.vx)};
      }
    }
    auto residual = compute_residual(m.clip.frames[static_cast<std::size_t>(t)],
                                     m.clip.frames[static_cast<std::size_t>(t - 1)], field);
    out.push_back({std::move(field), std::move(residual)});
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "codecpatch_XXXXXX").string();
    if (mkdtemp(pattern.data()) == nullptr) std::abort();
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_clip_dir(const std::filesystem::path& dir, const std::vector<Frame>& frames) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::snprintf(name, sizeof name, "frame_%05zu.ppm", t);
    write_ppm(dir / name, frames[t]);
  }
}

}  // namespace synth
