#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "codecpatch/error.hpp"
#include "codecpatch/image.hpp"
#include "codecpatch/ingest.hpp"
#include "codecpatch/motion.hpp"

namespace codecpatch {

struct FusionConfig {
  double alpha = 0.5;  // weight of the motion component
  bool camera_compensation = false;
};

inline constexpr double kSigmaGuard = 1e-8;

// Raw per-patch sums before normalization.
struct PatchComponents {
  std::uint32_t frame_index = 0;
  int grid_h = 0;
  int grid_w = 0;
  std::vector<double> motion_sum;
  std::vector<double> residual_sum;

  std::size_t size() const { return motion_sum.size(); }
};

struct PatchSaliencyGrid {
  std::uint32_t frame_index = 0;
  int grid_h = 0;
  int grid_w = 0;
  std::vector<double> scores;  // row-major over the patch grid
  std::vector<double> motion_sum;
  std::vector<double> residual_sum;

  std::size_t size() const { return scores.size(); }
};

struct PatchCoord {
  std::uint16_t y = 0;
  std::uint16_t x = 0;

  auto operator<=>(const PatchCoord&) const = default;
};

// Selected patches of one frame, sorted row-major.
struct PatchMask {
  std::uint32_t frame_index = 0;
  int grid_h = 0;
  int grid_w = 0;
  std::vector<PatchCoord> selected;

  bool operator==(const PatchMask&) const = default;
};

inline PatchComponents aggregate_components(const DenseMotion& motion, const ResidualMap& residual, int patch_size) {
  if (motion.height != residual.height || motion.width != residual.width) {
    throw InvariantError("motion/residual geometry mismatch");
  }
  if (patch_size < 1 || motion.height % patch_size != 0 || motion.width % patch_size != 0) {
    throw InvariantError("frame geometry is not a multiple of the patch size");
  }
  PatchComponents c;
  c.frame_index = residual.frame_index;
  c.grid_h = motion.height / patch_size;
  c.grid_w = motion.width / patch_size;
  const std::size_t n = static_cast<std::size_t>(c.grid_h) * c.grid_w;
  c.motion_sum.assign(n, 0.0);
  c.residual_sum.assign(n, 0.0);
  for (int gy = 0; gy < c.grid_h; ++gy) {
    for (int gx = 0; gx < c.grid_w; ++gx) {
      double m = 0.0;
      double r = 0.0;
      for (int y = gy * patch_size; y < (gy + 1) * patch_size; ++y) {
        for (int x = gx * patch_size; x < (gx + 1) * patch_size; ++x) {
          m += motion.magnitude(y, x);
          r += residual.at(y, x);
        }
      }
      c.motion_sum[static_cast<std::size_t>(gy) * c.grid_w + gx] = m;
      c.residual_sum[static_cast<std::size_t>(gy) * c.grid_w + gx] = r;
    }
  }
  return c;
}

namespace detail {

struct Moments {
  double mean = 0.0;
  double sigma = 0.0;
};

inline Moments moments_of(const std::vector<const std::vector<double>*>& parts) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* p : parts) {
    for (double v : *p) sum += v;
    n += p->size();
  }
  if (n == 0) return {};
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto* p : parts) {
    for (double v : *p) ss += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(ss / static_cast<double>(n))};
}

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("fusion alpha must lie in [0, 1]");
}

}  // namespace detail

// z-normalizes both components over all given frames jointly, fuses them as
// alpha*motion_z + (1-alpha)*residual_z and shifts by the joint minimum.
inline std::vector<PatchSaliencyGrid> fuse_jointly(const std::vector<PatchComponents>& frames, const FusionConfig& fusion) {
  detail::check_alpha(fusion.alpha);
  std::vector<const std::vector<double>*> motion_parts, residual_parts;
  for (const auto& f : frames) {
    motion_parts.push_back(&f.motion_sum);
    residual_parts.push_back(&f.residual_sum);
  }
  const auto mm = detail::moments_of(motion_parts);
  const auto rm = detail::moments_of(residual_parts);
  const double ms = std::max(mm.sigma, kSigmaGuard);
  const double rs = std::max(rm.sigma, kSigmaGuard);

  std::vector<PatchSaliencyGrid> grids;
  grids.reserve(frames.size());
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& f : frames) {
    PatchSaliencyGrid g{f.frame_index, f.grid_h, f.grid_w, std::vector<double>(f.size()), f.motion_sum, f.residual_sum};
    for (std::size_t i = 0; i < f.size(); ++i) {
      g.scores[i] = fusion.alpha * (f.motion_sum[i] - mm.mean) / ms + (1.0 - fusion.alpha) * (f.residual_sum[i] - rm.mean) / rs;
      lowest = std::min(lowest, g.scores[i]);
    }
    grids.push_back(std::move(g));
  }
  for (auto& g : grids) {
    for (auto& s : g.scores) s = std::max(0.0, s - lowest);
  }
  return grids;
}

inline PatchSaliencyGrid fuse_frame(const PatchComponents& frame, const FusionConfig& fusion) {
  return std::move(fuse_jointly({frame}, fusion).front());
}

// Per-frame patch saliency.
inline PatchSaliencyGrid aggregate_patch_saliency(const DenseMotion& motion, const ResidualMap& residual, int patch_size,
                                                  const FusionConfig& fusion = {}) {
  return fuse_frame(aggregate_components(motion, residual, patch_size), fusion);
}

inline PatchComponents frame_components(const FrameSignals& signals, int patch_size, const FusionConfig& fusion) {
  return aggregate_components(broadcast_motion(signals.motion, fusion.camera_compensation), signals.residual, patch_size);
}

namespace detail {

struct Candidate {
  double score;
  std::uint32_t frame;  // position in the grid list
  std::uint32_t index;  // row-major patch index
};

// Highest score first; ties by (frame, y, x) ascending.
inline bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.frame != b.frame) return a.frame < b.frame;
  return a.index < b.index;
}

inline std::vector<Candidate> top_k(std::vector<Candidate> pool, std::size_t k) {
  if (k < pool.size()) {
    std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(), ranks_before);
    pool.resize(k);
  }
  return pool;
}

inline void check_scores(const PatchSaliencyGrid& g) {
  if (g.scores.size() != static_cast<std::size_t>(g.grid_h) * g.grid_w) throw InvariantError("saliency grid size mismatch");
  for (double s : g.scores) {
    if (!std::isfinite(s) || s < 0.0) throw InvariantError("saliency scores must be finite and nonnegative");
  }
}

inline PatchCoord coord_of(std::uint32_t index, int grid_w) {
  return {static_cast<std::uint16_t>(index / static_cast<std::uint32_t>(grid_w)),
          static_cast<std::uint16_t>(index % static_cast<std::uint32_t>(grid_w))};
}

inline std::vector<PatchMask> masks_from(const std::vector<PatchSaliencyGrid>& grids, const std::vector<Candidate>& chosen) {
  std::vector<PatchMask> masks;
  masks.reserve(grids.size());
  for (const auto& g : grids) masks.push_back({g.frame_index, g.grid_h, g.grid_w, {}});
  for (const auto& c : chosen) masks[c.frame].selected.push_back(coord_of(c.index, grids[c.frame].grid_w));
  for (auto& m : masks) std::sort(m.selected.begin(), m.selected.end());
  return masks;
}

}  // namespace detail

// floor(r * P0), tolerant of representation error in r (0.3 * 10 -> 3).
inline std::size_t fixed_ratio_count(double r, std::size_t patches) {
  return static_cast<std::size_t>(std::floor(r * static_cast<double>(patches) * (1.0 + 1e-12)));
}

// Top floor(r*P0) patches of one frame; ties by smallest (y, x).
inline PatchMask select_mask_fixed_ratio(const PatchSaliencyGrid& grid, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw ConfigError("ratio must lie in (0, 1]");
  detail::check_scores(grid);
  const std::size_t k = fixed_ratio_count(r, grid.size());
  if (k < 1) throw ConfigError("ratio selects no patches (floor(r*P0) = 0)");
  std::vector<detail::Candidate> pool;
  pool.reserve(grid.size());
  for (std::uint32_t i = 0; i < grid.size(); ++i) pool.push_back({grid.scores[i], 0, i});
  return detail::masks_from({grid}, detail::top_k(std::move(pool), k)).front();
}

// Global top-K over all P-frame patches with K = budget - i_frames * P0;
// ties by smallest (t, y, x). Grids must be ordered by frame index.
inline std::vector<PatchMask> allocate_clip_budget(const std::vector<PatchSaliencyGrid>& grids, std::int64_t budget,
                                                   std::int64_t i_frames, std::int64_t patches_per_frame) {
  const std::int64_t i_tokens = i_frames * patches_per_frame;
  if (budget < i_tokens) {
    throw BudgetError("budget " + std::to_string(budget) + " cannot cover " + std::to_string(i_frames) + " I-frames (" +
                      std::to_string(i_tokens) + " tokens)");
  }
  const std::int64_t available = static_cast<std::int64_t>(grids.size()) * patches_per_frame;
  const std::int64_t k = budget - i_tokens;
  if (k > available) {
    throw BudgetError("budget " + std::to_string(budget) + " exceeds the " + std::to_string(i_tokens + available) +
                      " patches of the clip");
  }
  std::vector<detail::Candidate> pool;
  pool.reserve(static_cast<std::size_t>(available));
  for (std::uint32_t f = 0; f < grids.size(); ++f) {
    detail::check_scores(grids[f]);
    if (static_cast<std::int64_t>(grids[f].size()) != patches_per_frame) throw InvariantError("grid size differs from P0");
    if (f > 0 && grids[f].frame_index <= grids[f - 1].frame_index) throw InvariantError("grids must be ordered by frame");
    for (std::uint32_t i = 0; i < grids[f].size(); ++i) pool.push_back({grids[f].scores[i], f, i});
  }
  return detail::masks_from(grids, detail::top_k(std::move(pool), static_cast<std::size_t>(k)));
}

// Per-GOP enforcement: the budget is apportioned to GOPs by frame count
// (largest remainder, earlier GOP wins ties) and each GOP selects its own top-K.
inline std::vector<PatchMask> allocate_gop_budget(const std::vector<PatchSaliencyGrid>& grids, const GopPartition& gops,
                                                  std::int64_t budget, std::int64_t patches_per_frame) {
  const std::int64_t total = gops.total_frames();
  std::vector<std::int64_t> share(gops.segments.size());
  std::vector<std::pair<std::int64_t, std::size_t>> remainders;
  std::int64_t assigned = 0;
  for (std::size_t n = 0; n < gops.segments.size(); ++n) {
    share[n] = budget * gops.segments[n].length / total;
    assigned += share[n];
    remainders.push_back({budget * gops.segments[n].length % total, n});
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < budget; ++i, ++assigned) share[remainders[i].second] += 1;

  std::vector<PatchMask> masks;
  for (std::size_t n = 0; n < gops.segments.size(); ++n) {
    const auto& seg = gops.segments[n];
    std::vector<PatchSaliencyGrid> local;
    for (const auto& g : grids) {
      const auto t = static_cast<int>(g.frame_index);
      if (t > seg.start && t < seg.start + seg.length) local.push_back(g);
    }
    if (static_cast<int>(local.size()) != seg.length - 1) throw InvariantError("missing saliency grid in GOP");
    auto part = allocate_clip_budget(local, share[n], 1, patches_per_frame);
    masks.insert(masks.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return masks;
}

// Fixed 8-step ramp from dark purple to yellow.
inline constexpr std::array<std::array<std::uint8_t, 3>, 8> kHeatRamp{{
    {0x44, 0x01, 0x54},
    {0x46, 0x32, 0x7e},
    {0x36, 0x5c, 0x8d},
    {0x27, 0x7f, 0x8e},
    {0x1f, 0xa1, 0x87},
    {0x4a, 0xc1, 0x6d},
    {0xa0, 0xda, 0x39},
    {0xfd, 0xe7, 0x25},
}};

// One patch_size x patch_size block per patch, colored by score / max_score.
inline Frame render_heatmap(const PatchSaliencyGrid& grid, int patch_size, double max_score) {
  Frame img(grid.grid_h * patch_size, grid.grid_w * patch_size);
  for (int gy = 0; gy < grid.grid_h; ++gy) {
    for (int gx = 0; gx < grid.grid_w; ++gx) {
      const double s = grid.scores[static_cast<std::size_t>(gy) * grid.grid_w + gx];
      const int bin = max_score > 0.0 ? std::clamp(static_cast<int>(8.0 * s / max_score), 0, 7) : 0;
      for (int y = gy * patch_size; y < (gy + 1) * patch_size; ++y) {
        for (int x = gx * patch_size; x < (gx + 1) * patch_size; ++x) {
          std::copy(kHeatRamp[bin].begin(), kHeatRamp[bin].end(), img.pixel(y, x));
        }
      }
    }
  }
  return img;
}

}  // namespace codecpatch
