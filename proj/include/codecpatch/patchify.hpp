#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codecpatch/error.hpp"
#include "codecpatch/ingest.hpp"
#include "codecpatch/random.hpp"
#include "codecpatch/saliency.hpp"

namespace codecpatch {

inline constexpr int kVirtualGridFrames = 64;

enum class LayoutMode { codec, chunk, image };

enum class FrameType : std::uint8_t { i_frame = 0, p_frame = 1, sampled = 2, static_frame = 3 };

inline std::string to_string(LayoutMode mode) {
  switch (mode) {
    case LayoutMode::codec: return "codec";
    case LayoutMode::chunk: return "chunk";
    case LayoutMode::image: return "image";
  }
  return "?";
}

inline LayoutMode parse_layout_mode(const std::string& s) {
  if (s == "codec") return LayoutMode::codec;
  if (s == "chunk") return LayoutMode::chunk;
  if (s == "image") return LayoutMode::image;
  throw ConfigError("unknown mode '" + s + "'");
}

struct Token {
  std::uint16_t t_virtual = 0;
  std::uint16_t y = 0;
  std::uint16_t x = 0;
  FrameType frame_type = FrameType::i_frame;
  std::uint16_t source_t = 0;
  std::vector<std::uint8_t> payload;  // patch_size x patch_size x RGB

  bool operator==(const Token&) const = default;
};

struct BudgetMeta {
  int patches_per_frame = 0;
  std::optional<std::int64_t> budget;
  int i_frames = 0;
  std::optional<double> ratio;
  std::optional<int> chunks;

  bool operator==(const BudgetMeta&) const = default;
};

struct TokenLayout {
  LayoutMode mode = LayoutMode::codec;
  int grid_T = kVirtualGridFrames;
  int patch_size = kDefaultPatchSize;
  int grid_h = 0;
  int grid_w = 0;
  int dense_T = 0;  // frame count of the source clip
  std::string clip_ref;
  BudgetMeta budget_meta;
  std::vector<GopSegment> gops;  // codec mode only
  std::vector<Token> tokens;
  nlohmann::json metadata = nlohmann::json::object();  // seeds, run config, intervention record

  int patches_per_frame() const { return grid_h * grid_w; }
  std::size_t payload_size() const { return static_cast<std::size_t>(patch_size) * patch_size * 3; }
  bool operator==(const TokenLayout&) const = default;
};

inline std::vector<std::uint8_t> extract_patch(const Frame& frame, int gy, int gx, int patch_size) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(patch_size) * patch_size * 3);
  for (int y = 0; y < patch_size; ++y) {
    const std::uint8_t* row = frame.pixel(gy * patch_size + y, gx * patch_size);
    std::copy(row, row + static_cast<std::size_t>(patch_size) * 3, out.begin() + static_cast<std::ptrdiff_t>(y) * patch_size * 3);
  }
  return out;
}

// floor(source_t * grid_T / T)
inline std::uint16_t virtual_time(int source_t, int num_frames, int grid_T = kVirtualGridFrames) {
  return static_cast<std::uint16_t>(static_cast<std::int64_t>(source_t) * grid_T / num_frames);
}

namespace detail {

inline TokenLayout empty_layout(const RawClip& clip, LayoutMode mode) {
  if (clip.frames.empty()) throw InvariantError("clip has no frames");
  if (clip.height() % clip.patch_size != 0 || clip.width() % clip.patch_size != 0) {
    throw InvariantError("clip geometry is not a multiple of the patch size");
  }
  TokenLayout layout;
  layout.mode = mode;
  layout.patch_size = clip.patch_size;
  layout.grid_h = clip.grid_height();
  layout.grid_w = clip.grid_width();
  layout.dense_T = clip.num_frames();
  layout.clip_ref = clip.source_id;
  layout.budget_meta.patches_per_frame = clip.patches_per_frame();
  return layout;
}

inline void push_full_frame(TokenLayout& layout, const Frame& frame, std::uint16_t t_virtual, FrameType type,
                            int source_t) {
  for (int y = 0; y < layout.grid_h; ++y) {
    for (int x = 0; x < layout.grid_w; ++x) {
      layout.tokens.push_back({t_virtual, static_cast<std::uint16_t>(y), static_cast<std::uint16_t>(x), type,
                               static_cast<std::uint16_t>(source_t), extract_patch(frame, y, x, layout.patch_size)});
    }
  }
}

}  // namespace detail

// Dense video-codec layout: per GOP the full I-frame followed by the masked
// patches of each P-frame. `masks` holds exactly one mask per P-frame.
inline TokenLayout patchify_codec(const RawClip& clip, const GopPartition& gops, const std::vector<PatchMask>& masks,
                                  int grid_T = kVirtualGridFrames) {
  auto layout = detail::empty_layout(clip, LayoutMode::codec);
  layout.grid_T = grid_T;
  if (gops.total_frames() != clip.num_frames()) throw InvariantError("GOP partition does not cover the clip");
  if (clip.num_frames() > grid_T) {
    throw ConfigError("codec mode needs T <= " + std::to_string(grid_T) + " so virtual positions stay unique");
  }
  if (clip.num_frames() > 0xFFFF) throw ConfigError("clip too long for the exchange format");
  layout.gops = gops.segments;
  layout.budget_meta.i_frames = gops.i_frame_count();

  std::vector<const PatchMask*> by_frame(clip.frames.size(), nullptr);
  for (const auto& m : masks) {
    if (m.frame_index >= by_frame.size() || gops.is_i_frame(static_cast<int>(m.frame_index))) {
      throw InvariantError("mask for frame " + std::to_string(m.frame_index) + " is not a P-frame mask");
    }
    if (m.grid_h != layout.grid_h || m.grid_w != layout.grid_w) throw InvariantError("mask geometry mismatch");
    if (by_frame[m.frame_index] != nullptr) throw InvariantError("duplicate mask for frame " + std::to_string(m.frame_index));
    by_frame[m.frame_index] = &m;
  }

  const int T = clip.num_frames();
  for (const auto& seg : gops.segments) {
    detail::push_full_frame(layout, clip.frames[seg.start], virtual_time(seg.start, T, grid_T), FrameType::i_frame,
                            seg.start);
    for (int t = seg.start + 1; t < seg.start + seg.length; ++t) {
      const PatchMask* mask = by_frame[t];
      if (mask == nullptr) throw InvariantError("missing mask for P-frame " + std::to_string(t));
      for (std::size_t i = 0; i < mask->selected.size(); ++i) {
        const auto c = mask->selected[i];
        if (c.y >= layout.grid_h || c.x >= layout.grid_w || (i > 0 && !(mask->selected[i - 1] < c))) {
          throw InvariantError("mask for frame " + std::to_string(t) + " is not a sorted subset of the grid");
        }
        layout.tokens.push_back({virtual_time(t, T, grid_T), c.y, c.x, FrameType::p_frame, static_cast<std::uint16_t>(t),
                                 extract_patch(clip.frames[t], c.y, c.x, layout.patch_size)});
      }
    }
  }
  return layout;
}

// Chunk-wise layout: one uniformly drawn frame from each of C equal chunks of
// floor(T/C) frames; the chunk index is the temporal coordinate.
inline TokenLayout patchify_chunk(const RawClip& clip, int chunks, std::uint64_t seed, int grid_T = kVirtualGridFrames) {
  if (chunks < 1) throw ConfigError("chunk count must be >= 1");
  if (chunks > clip.num_frames()) throw ConfigError("chunk count exceeds frame count");
  if (chunks > grid_T) throw ConfigError("chunk count exceeds the virtual grid length");
  auto layout = detail::empty_layout(clip, LayoutMode::chunk);
  layout.grid_T = grid_T;
  layout.budget_meta.chunks = chunks;
  layout.metadata["seeds"]["chunk_seed"] = seed;

  Rng rng(seed);
  const int span = clip.num_frames() / chunks;
  for (int c = 0; c < chunks; ++c) {
    const int t = c * span + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(span)));
    detail::push_full_frame(layout, clip.frames[t], static_cast<std::uint16_t>(c), FrameType::sampled, t);
  }
  return layout;
}

inline TokenLayout patchify_image(const RawClip& image) {
  if (image.num_frames() != 1) throw ConfigError("image mode needs exactly one frame, got " + std::to_string(image.num_frames()));
  auto layout = detail::empty_layout(image, LayoutMode::image);
  detail::push_full_frame(layout, image.frames.front(), 0, FrameType::static_frame, 0);
  return layout;
}

struct GopAccounting {
  GopSegment segment;
  std::int64_t tokens = 0;
  double gamma = 0.0;
};

struct TokenAccounting {
  std::int64_t tokens = 0;
  double gamma = 0.0;
  std::vector<GopAccounting> per_gop;
};

// M, gamma = 1 - M / (dense_T * P0), and the per-GOP ratios for codec layouts.
inline TokenAccounting token_accounting(const TokenLayout& layout, int dense_T) {
  if (dense_T < 1) throw ConfigError("dense frame count must be >= 1");
  TokenAccounting acc;
  const std::int64_t p0 = layout.patches_per_frame();
  acc.tokens = static_cast<std::int64_t>(layout.tokens.size());
  acc.gamma = 1.0 - static_cast<double>(acc.tokens) / static_cast<double>(dense_T * p0);
  for (const auto& seg : layout.gops) acc.per_gop.push_back({seg, 0, 0.0});
  for (const auto& tok : layout.tokens) {
    for (auto& g : acc.per_gop) {
      if (tok.source_t >= g.segment.start && tok.source_t < g.segment.start + g.segment.length) {
        ++g.tokens;
        break;
      }
    }
  }
  for (auto& g : acc.per_gop) {
    g.gamma = 1.0 - static_cast<double>(g.tokens) / static_cast<double>(g.segment.length * p0);
  }
  return acc;
}

enum class InterventionKind { nonmotion_swap, crossvideo_swap, position_shuffle };

inline std::string to_string(InterventionKind kind) {
  switch (kind) {
    case InterventionKind::nonmotion_swap: return "nonmotion_swap";
    case InterventionKind::crossvideo_swap: return "crossvideo_swap";
    case InterventionKind::position_shuffle: return "position_shuffle";
  }
  return "?";
}

inline InterventionKind parse_intervention(const std::string& s) {
  if (s == "nonmotion_swap") return InterventionKind::nonmotion_swap;
  if (s == "crossvideo_swap") return InterventionKind::crossvideo_swap;
  if (s == "position_shuffle") return InterventionKind::position_shuffle;
  throw ConfigError("unknown intervention '" + s + "'");
}

struct InterventionResult {
  TokenLayout layout;
  std::vector<int> skipped_frames;  // nonmotion_swap frames with no unselected patch
};

namespace detail {

inline std::vector<std::size_t> p_token_indices(const TokenLayout& layout) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layout.tokens.size(); ++i) {
    if (layout.tokens[i].frame_type == FrameType::p_frame) idx.push_back(i);
  }
  return idx;
}

}  // namespace detail

// Ablation interventions on a codec layout. nonmotion_swap reads replacement
// patches from `source` (the clip the layout was built from);
// crossvideo_swap draws payloads from `donor`, a codec layout of another clip.
inline InterventionResult intervene(const TokenLayout& layout, InterventionKind kind, std::uint64_t seed,
                                    const RawClip* source = nullptr, const TokenLayout* donor = nullptr) {
  if (layout.mode != LayoutMode::codec) throw ConfigError("interventions apply to codec layouts only");
  InterventionResult result{layout, {}};
  auto& out = result.layout;
  Rng rng(seed);
  const auto p_tokens = detail::p_token_indices(layout);

  switch (kind) {
    case InterventionKind::nonmotion_swap: {
      if (source == nullptr) throw ConfigError("nonmotion_swap needs the source clip");
      if (source->source_id != layout.clip_ref || source->num_frames() != layout.dense_T ||
          source->grid_height() != layout.grid_h || source->grid_width() != layout.grid_w ||
          source->patch_size != layout.patch_size) {
        throw ConfigError("source clip does not match the layout");
      }
      std::map<int, std::vector<std::size_t>> by_frame;
      for (auto i : p_tokens) by_frame[layout.tokens[i].source_t].push_back(i);
      for (const auto& [t, indices] : by_frame) {
        std::vector<bool> selected(static_cast<std::size_t>(layout.patches_per_frame()), false);
        for (auto i : indices) selected[static_cast<std::size_t>(layout.tokens[i].y) * layout.grid_w + layout.tokens[i].x] = true;
        std::vector<std::uint32_t> unselected;
        for (std::uint32_t p = 0; p < selected.size(); ++p) {
          if (!selected[p]) unselected.push_back(p);
        }
        if (unselected.empty()) {
          result.skipped_frames.push_back(t);
          continue;
        }
        for (auto i : indices) {
          const auto p = unselected[uniform_index(rng, unselected.size())];
          out.tokens[i].payload = extract_patch(source->frames[t], static_cast<int>(p) / layout.grid_w,
                                                static_cast<int>(p) % layout.grid_w, layout.patch_size);
        }
      }
      break;
    }
    case InterventionKind::crossvideo_swap: {
      if (donor == nullptr) throw ConfigError("crossvideo_swap needs a donor layout");
      if (donor->mode != LayoutMode::codec || donor->clip_ref == layout.clip_ref || donor->patch_size != layout.patch_size) {
        throw ConfigError("donor layout is ineligible (needs a codec layout of a different clip with equal patch size)");
      }
      const auto donor_tokens = detail::p_token_indices(*donor);
      if (donor_tokens.empty() && !p_tokens.empty()) throw ConfigError("donor layout is ineligible (no P-frame tokens)");
      std::vector<std::size_t> pairing;
      if (donor_tokens.size() >= p_tokens.size()) {
        pairing = donor_tokens;
        shuffle(std::span(pairing), rng);
        pairing.resize(p_tokens.size());
      } else {
        for (std::size_t k = 0; k < p_tokens.size(); ++k) pairing.push_back(donor_tokens[uniform_index(rng, donor_tokens.size())]);
      }
      for (std::size_t k = 0; k < p_tokens.size(); ++k) out.tokens[p_tokens[k]].payload = donor->tokens[pairing[k]].payload;
      break;
    }
    case InterventionKind::position_shuffle: {
      std::vector<std::array<std::uint16_t, 3>> positions;
      for (auto i : p_tokens) positions.push_back({layout.tokens[i].t_virtual, layout.tokens[i].y, layout.tokens[i].x});
      shuffle(std::span(positions), rng);
      for (std::size_t k = 0; k < p_tokens.size(); ++k) {
        auto& tok = out.tokens[p_tokens[k]];
        tok.t_virtual = positions[k][0];
        tok.y = positions[k][1];
        tok.x = positions[k][2];
      }
      break;
    }
  }

  nlohmann::json record{{"kind", to_string(kind)}, {"seed", seed}, {"skipped_frames", result.skipped_frames}};
  if (donor != nullptr && kind == InterventionKind::crossvideo_swap) record["donor"] = donor->clip_ref;
  out.metadata["intervention"] = record;
  out.metadata["seeds"]["intervention_seed"] = seed;
  return result;
}

// True iff no two tokens share a (t_virtual, y, x) position.
inline bool positions_unique(const TokenLayout& layout) {
  std::vector<std::uint64_t> keys;
  keys.reserve(layout.tokens.size());
  for (const auto& t : layout.tokens) {
    keys.push_back((std::uint64_t{t.t_virtual} << 32) | (std::uint64_t{t.y} << 16) | t.x);
  }
  std::sort(keys.begin(), keys.end());
  return std::adjacent_find(keys.begin(), keys.end()) == keys.end();
}

}  // namespace codecpatch
