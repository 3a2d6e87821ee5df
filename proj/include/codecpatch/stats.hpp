#pragma once

// Spatial and temporal token statistics over one or more layouts.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "codecpatch/error.hpp"
#include "codecpatch/patchify.hpp"

namespace codecpatch {

struct LayoutStats {
  int grid_h = 0;
  int grid_w = 0;
  int grid_T = 0;
  std::int64_t p_tokens = 0;
  std::vector<std::int64_t> spatial_histogram;  // P-frame tokens per (y, x)
  std::vector<std::int64_t> tokens_per_time;    // all tokens per t_virtual
  std::optional<double> center_bias;            // unset when there are no P-frame tokens
};

// Distance of the patch center from the frame center, scaled so the frame
// corners sit at 1.
inline double normalized_radius(int y, int x, int grid_h, int grid_w) {
  const double dy = (y + 0.5) / grid_h - 0.5;
  const double dx = (x + 0.5) / grid_w - 0.5;
  return std::sqrt((dy * dy + dx * dx) / 0.5);
}

inline LayoutStats layout_stats(std::span<const TokenLayout> layouts) {
  if (layouts.empty()) throw ConfigError("stats need at least one layout");
  LayoutStats s;
  s.grid_h = layouts.front().grid_h;
  s.grid_w = layouts.front().grid_w;
  s.grid_T = layouts.front().grid_T;
  for (const auto& l : layouts) {
    if (l.grid_h != s.grid_h || l.grid_w != s.grid_w || l.grid_T != s.grid_T) {
      throw IoError("layouts disagree on grid geometry (" + l.clip_ref + ")");
    }
  }
  s.spatial_histogram.assign(static_cast<std::size_t>(s.grid_h) * s.grid_w, 0);
  s.tokens_per_time.assign(static_cast<std::size_t>(s.grid_T), 0);
  double radius_sum = 0.0;
  for (const auto& l : layouts) {
    for (const auto& t : l.tokens) {
      ++s.tokens_per_time[t.t_virtual];
      if (t.frame_type != FrameType::p_frame) continue;
      ++s.p_tokens;
      ++s.spatial_histogram[static_cast<std::size_t>(t.y) * s.grid_w + t.x];
      radius_sum += normalized_radius(t.y, t.x, s.grid_h, s.grid_w);
    }
  }
  if (s.p_tokens > 0) s.center_bias = radius_sum / static_cast<double>(s.p_tokens);
  return s;
}

inline std::string format_stats(const LayoutStats& s, std::size_t layout_count, const std::string& header_comment = {}) {
  std::string out = "# codecpatch stats\n";
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  char buf[64];
  out += "layouts " + std::to_string(layout_count) + "\n";
  out += "p_tokens " + std::to_string(s.p_tokens) + "\n";
  if (s.center_bias) {
    std::snprintf(buf, sizeof buf, "%.9f", *s.center_bias);
    out += std::string("center_bias ") + buf + "\n";
  } else {
    out += "center_bias nan\n";
  }
  out += "[spatial_histogram] rows=" + std::to_string(s.grid_h) + " cols=" + std::to_string(s.grid_w) + "\n";
  for (int y = 0; y < s.grid_h; ++y) {
    for (int x = 0; x < s.grid_w; ++x) {
      if (x > 0) out += ' ';
      out += std::to_string(s.spatial_histogram[static_cast<std::size_t>(y) * s.grid_w + x]);
    }
    out += '\n';
  }
  out += "[token_accumulation]\nt tokens cumulative\n";
  std::int64_t cumulative = 0;
  for (int t = 0; t < s.grid_T; ++t) {
    cumulative += s.tokens_per_time[t];
    out += std::to_string(t) + " " + std::to_string(s.tokens_per_time[t]) + " " + std::to_string(cumulative) + "\n";
  }
  return out;
}

}  // namespace codecpatch
