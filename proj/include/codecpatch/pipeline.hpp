#pragma once

// Clip -> signals -> saliency -> masks -> layout, shared by the CLI and tests.

#include <cstdint>
#include <optional>
#include <vector>

#include "codecpatch/error.hpp"
#include "codecpatch/ingest.hpp"
#include "codecpatch/motion.hpp"
#include "codecpatch/parallel.hpp"
#include "codecpatch/patchify.hpp"
#include "codecpatch/saliency.hpp"

namespace codecpatch {

inline constexpr std::int64_t kDefaultBudget = 2048;

struct CodecOptions {
  int gop_length = kDefaultGopLength;
  // Exactly one selection rule applies: a clip-level token budget (default)
  // or a fixed per-frame ratio.
  std::optional<std::int64_t> budget;
  std::optional<double> ratio;
  bool per_gop_budget = false;
  MotionConfig motion;
  FusionConfig fusion;
  int grid_T = kVirtualGridFrames;
  int jobs = 1;
};

struct CodecResult {
  GopPartition gops;
  std::vector<PatchSaliencyGrid> grids;  // one per P-frame, ordered by frame
  std::vector<PatchMask> masks;
  TokenLayout layout;
};

// Per-frame normalization for fixed-ratio selection, joint normalization over
// all P-frames for budgeted selection.
inline std::vector<PatchSaliencyGrid> saliency_grids(const ClipSignals& signals, int patch_size, const FusionConfig& fusion,
                                                     bool joint, int jobs = 1) {
  std::vector<PatchComponents> components(signals.size());
  parallel_for(signals.size(), jobs, [&](std::size_t i) { components[i] = frame_components(signals[i], patch_size, fusion); });
  if (joint) return fuse_jointly(components, fusion);
  std::vector<PatchSaliencyGrid> grids;
  grids.reserve(components.size());
  for (const auto& c : components) grids.push_back(fuse_frame(c, fusion));
  return grids;
}

inline CodecResult run_codec(const RawClip& clip, const ClipSignals& signals, const CodecOptions& options) {
  if (options.budget && options.ratio) throw ConfigError("budget and ratio are mutually exclusive");
  CodecResult result;
  result.gops = partition_gops(clip, options.gop_length);
  if (signals.size() != result.gops.p_frames().size()) throw InvariantError("signals do not cover every P-frame");
  const std::int64_t p0 = clip.patches_per_frame();

  if (options.ratio) {
    result.grids = saliency_grids(signals, clip.patch_size, options.fusion, false, options.jobs);
    for (const auto& g : result.grids) result.masks.push_back(select_mask_fixed_ratio(g, *options.ratio));
  } else {
    const std::int64_t budget = options.budget.value_or(kDefaultBudget);
    result.grids = saliency_grids(signals, clip.patch_size, options.fusion, true, options.jobs);
    result.masks = options.per_gop_budget
                       ? allocate_gop_budget(result.grids, result.gops, budget, p0)
                       : allocate_clip_budget(result.grids, budget, result.gops.i_frame_count(), p0);
  }

  result.layout = patchify_codec(clip, result.gops, result.masks, options.grid_T);
  if (options.ratio) {
    result.layout.budget_meta.ratio = *options.ratio;
  } else {
    result.layout.budget_meta.budget = options.budget.value_or(kDefaultBudget);
  }
  return result;
}

inline CodecResult run_codec(const RawClip& clip, const CodecOptions& options) {
  const auto gops = partition_gops(clip, options.gop_length);
  return run_codec(clip, estimate_clip_signals(clip, gops, options.motion, options.jobs), options);
}

}  // namespace codecpatch
