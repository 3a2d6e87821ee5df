#pragma once

// Codec-style motion and residual signals for P-frames, emulated with
// integer-pel full-search block matching against the previous frame.
//
// Vector convention: a block of the current frame at (y, x) is predicted
// from the reference at (y + dy, x + dx). Reference samples outside the frame
// are clamped to the nearest edge pixel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

#include "codecpatch/error.hpp"
#include "codecpatch/image.hpp"
#include "codecpatch/ingest.hpp"
#include "codecpatch/parallel.hpp"

namespace codecpatch {

struct LumaPlane {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float clamped(int y, int x) const {
    return at(std::clamp(y, 0, height - 1), std::clamp(x, 0, width - 1));
  }
};

// BT.601 luma weights.
inline LumaPlane luma_of(const Frame& frame) {
  LumaPlane plane{frame.height, frame.width, std::vector<float>(static_cast<std::size_t>(frame.height) * frame.width)};
  for (std::size_t i = 0; i < plane.values.size(); ++i) {
    const std::uint8_t* px = frame.rgb.data() + 3 * i;
    plane.values[i] = static_cast<float>(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
  }
  return plane;
}

struct MotionVector {
  std::int16_t dy = 0;
  std::int16_t dx = 0;

  bool operator==(const MotionVector&) const = default;
};

struct MotionConfig {
  int block_size = 16;
  int search_range = 16;
};

// One vector per block; the block grid covers the frame, with partial blocks
// at the bottom/right edges when the frame is not a block multiple.
struct MotionField {
  int height = 0;
  int width = 0;
  int block_size = 16;
  int blocks_y = 0;
  int blocks_x = 0;
  std::vector<MotionVector> vectors;
  std::uint32_t frame_index = 0;
  std::uint32_t reference_index = 0;

  const MotionVector& at(int by, int bx) const { return vectors[static_cast<std::size_t>(by) * blocks_x + bx]; }
  bool operator==(const MotionField&) const = default;
};

struct ResidualMap {
  int height = 0;
  int width = 0;
  std::vector<float> energy;
  std::uint32_t frame_index = 0;

  float at(int y, int x) const { return energy[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const ResidualMap&) const = default;
};

struct DenseMotion {
  int height = 0;
  int width = 0;
  std::vector<float> dy;
  std::vector<float> dx;

  double magnitude(int y, int x) const {
    const std::size_t i = static_cast<std::size_t>(y) * width + x;
    return std::hypot(static_cast<double>(dy[i]), static_cast<double>(dx[i]));
  }
};

inline int block_grid_extent(int pixels, int block_size) { return (pixels + block_size - 1) / block_size; }

inline void validate_motion_config(const MotionConfig& cfg) {
  const int b = cfg.block_size;
  if (b < 4 || b > 64 || (b & (b - 1)) != 0) throw ConfigError("block size must be a power of two in [4, 64]");
  if (cfg.search_range < 0 || cfg.search_range > std::numeric_limits<std::int16_t>::max()) {
    throw ConfigError("search range out of range");
  }
}

namespace detail {

// Search order doubles as the tie-break: smallest |dy|+|dx|, then dy, then dx.
inline std::vector<MotionVector> search_order(int range) {
  std::vector<MotionVector> order;
  order.reserve(static_cast<std::size_t>(2 * range + 1) * (2 * range + 1));
  for (int dy = -range; dy <= range; ++dy) {
    for (int dx = -range; dx <= range; ++dx) {
      order.push_back({static_cast<std::int16_t>(dy), static_cast<std::int16_t>(dx)});
    }
  }
  std::sort(order.begin(), order.end(), [](const MotionVector& a, const MotionVector& b) {
    const int la = std::abs(a.dy) + std::abs(a.dx);
    const int lb = std::abs(b.dy) + std::abs(b.dx);
    if (la != lb) return la < lb;
    if (a.dy != b.dy) return a.dy < b.dy;
    return a.dx < b.dx;
  });
  return order;
}

// Sum of absolute luma differences for one block and candidate. Stops early
// once the partial sum reaches `bound`; the returned value is then >= bound.
inline double block_sad(const LumaPlane& ref, const LumaPlane& cur, int y0, int x0, int block, MotionVector v,
                        double bound) {
  const int y1 = y0 + block;
  const int x1 = x0 + block;
  const bool inside = y1 <= cur.height && x1 <= cur.width && y0 + v.dy >= 0 && x0 + v.dx >= 0 &&
                      y1 + v.dy <= ref.height && x1 + v.dx <= ref.width;
  double sad = 0.0;
  if (inside) {
    for (int y = y0; y < y1; ++y) {
      const float* c = cur.values.data() + static_cast<std::size_t>(y) * cur.width + x0;
      const float* r = ref.values.data() + static_cast<std::size_t>(y + v.dy) * ref.width + x0 + v.dx;
      float row = 0.0f;
      for (int i = 0; i < block; ++i) row += std::fabs(c[i] - r[i]);
      sad += row;
      if (sad >= bound) return sad;
    }
    return sad;
  }
  for (int y = y0; y < y1; ++y) {
    float row = 0.0f;
    for (int x = x0; x < x1; ++x) row += std::fabs(cur.clamped(y, x) - ref.clamped(y + v.dy, x + v.dx));
    sad += row;
    if (sad >= bound) return sad;
  }
  return sad;
}

}  // namespace detail

// Full-search block matching minimizing SAD over [-range, range]^2. Blocks
// that overhang the frame are edge-padded.
inline MotionField estimate_motion(const LumaPlane& ref, const LumaPlane& cur, const MotionConfig& cfg = {},
                                   std::uint32_t frame_index = 0, std::uint32_t reference_index = 0) {
  validate_motion_config(cfg);
  if (ref.height != cur.height || ref.width != cur.width) throw InvariantError("motion estimation geometry mismatch");
  MotionField field;
  field.height = cur.height;
  field.width = cur.width;
  field.block_size = cfg.block_size;
  field.blocks_y = block_grid_extent(cur.height, cfg.block_size);
  field.blocks_x = block_grid_extent(cur.width, cfg.block_size);
  field.frame_index = frame_index;
  field.reference_index = reference_index;
  field.vectors.resize(static_cast<std::size_t>(field.blocks_y) * field.blocks_x);

  const auto order = detail::search_order(cfg.search_range);
  for (int by = 0; by < field.blocks_y; ++by) {
    for (int bx = 0; bx < field.blocks_x; ++bx) {
      double best = std::numeric_limits<double>::infinity();
      MotionVector best_v{};
      for (const auto& v : order) {
        const double sad = detail::block_sad(ref, cur, by * cfg.block_size, bx * cfg.block_size, cfg.block_size, v, best);
        if (sad < best) {
          best = sad;
          best_v = v;
          if (best == 0.0) break;
        }
      }
      field.vectors[static_cast<std::size_t>(by) * field.blocks_x + bx] = best_v;
    }
  }
  return field;
}

inline MotionField estimate_motion(const Frame& ref, const Frame& cur, const MotionConfig& cfg = {},
                                   std::uint32_t frame_index = 0, std::uint32_t reference_index = 0) {
  return estimate_motion(luma_of(ref), luma_of(cur), cfg, frame_index, reference_index);
}

// Component-wise median of the block vectors (mean of the two middle values
// for even counts). Used as the global camera-motion estimate.
inline std::pair<double, double> median_motion(const MotionField& field) {
  if (field.vectors.empty()) return {0.0, 0.0};
  auto median = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? static_cast<double>(v[n / 2]) : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::vector<int> ys, xs;
  ys.reserve(field.vectors.size());
  xs.reserve(field.vectors.size());
  for (const auto& v : field.vectors) {
    ys.push_back(v.dy);
    xs.push_back(v.dx);
  }
  return {median(ys), median(xs)};
}

// Per-pixel motion map. With camera compensation the per-frame median vector
// is subtracted from every pixel.
inline DenseMotion broadcast_motion(const MotionField& field, bool camera_compensation = false) {
  DenseMotion dense{field.height, field.width, {}, {}};
  const std::size_t n = static_cast<std::size_t>(field.height) * field.width;
  dense.dy.resize(n);
  dense.dx.resize(n);
  const auto [my, mx] = camera_compensation ? median_motion(field) : std::pair<double, double>{0.0, 0.0};
  for (int y = 0; y < field.height; ++y) {
    for (int x = 0; x < field.width; ++x) {
      const auto& v = field.at(y / field.block_size, x / field.block_size);
      const std::size_t i = static_cast<std::size_t>(y) * field.width + x;
      dense.dy[i] = static_cast<float>(v.dy - my);
      dense.dx[i] = static_cast<float>(v.dx - mx);
    }
  }
  return dense;
}

// Squared luma difference after motion compensation.
inline ResidualMap compute_residual(const LumaPlane& cur, const LumaPlane& ref, const MotionField& field) {
  if (cur.height != ref.height || cur.width != ref.width || field.height != cur.height || field.width != cur.width) {
    throw InvariantError("residual geometry mismatch");
  }
  ResidualMap map{cur.height, cur.width, std::vector<float>(cur.values.size()), field.frame_index};
  for (int y = 0; y < cur.height; ++y) {
    for (int x = 0; x < cur.width; ++x) {
      const auto& v = field.at(y / field.block_size, x / field.block_size);
      const float d = cur.at(y, x) - ref.clamped(y + v.dy, x + v.dx);
      map.energy[static_cast<std::size_t>(y) * cur.width + x] = d * d;
    }
  }
  return map;
}

inline ResidualMap compute_residual(const Frame& cur, const Frame& ref, const MotionField& field) {
  return compute_residual(luma_of(cur), luma_of(ref), field);
}

struct FrameSignals {
  MotionField motion;
  ResidualMap residual;

  bool operator==(const FrameSignals&) const = default;
};

// Signals for every P-frame of a clip, ordered by frame index.
using ClipSignals = std::vector<FrameSignals>;

// Each P-frame references the immediately preceding frame of its GOP.
inline ClipSignals estimate_clip_signals(const RawClip& clip, const GopPartition& gops, const MotionConfig& cfg = {},
                                         int jobs = 1) {
  validate_motion_config(cfg);
  std::vector<LumaPlane> luma(clip.frames.size());
  parallel_for(luma.size(), jobs, [&](std::size_t t) { luma[t] = luma_of(clip.frames[t]); });

  const auto p_frames = gops.p_frames();
  ClipSignals signals(p_frames.size());
  parallel_for(p_frames.size(), jobs, [&](std::size_t i) {
    const int t = p_frames[i];
    auto motion = estimate_motion(luma[t - 1], luma[t], cfg, static_cast<std::uint32_t>(t),
                                  static_cast<std::uint32_t>(t - 1));
    auto residual = compute_residual(luma[t], luma[t - 1], motion);
    signals[i] = {std::move(motion), std::move(residual)};
  });
  return signals;
}

}  // namespace codecpatch
