#pragma once

// 3D rotary position encoding. The head_dim/2 rotation pairs are split into
// contiguous temporal, row and column blocks (default ratio 4:6:6); pair k of
// an axis block with n pairs rotates by coord * base^(-2k / (2n)).

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "codecpatch/error.hpp"
#include "codecpatch/patchify.hpp"

namespace codecpatch {

struct RopeConfig {
  int head_dim = 64;
  std::array<int, 3> split{4, 6, 6};  // T : H : W
  double base = 10000.0;
};

struct PositionTriple {
  std::int64_t t = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;

  PositionTriple operator+(const PositionTriple& o) const { return {t + o.t, y + o.y, x + o.x}; }
  bool operator==(const PositionTriple&) const = default;
};

// Largest-remainder apportionment of head_dim/2 pairs to the three axes; ties
// on the remainder go to the earlier axis.
inline std::array<int, 3> rope_pair_split(const RopeConfig& cfg) {
  if (cfg.head_dim < 2 || cfg.head_dim % 2 != 0) throw ConfigError("head_dim must be even and >= 2");
  const int weight = cfg.split[0] + cfg.split[1] + cfg.split[2];
  if (cfg.split[0] < 0 || cfg.split[1] < 0 || cfg.split[2] < 0 || weight == 0) throw ConfigError("invalid axis split");
  const int pairs = cfg.head_dim / 2;
  std::array<int, 3> out{};
  std::array<int, 3> rem{};
  int assigned = 0;
  for (int a = 0; a < 3; ++a) {
    out[a] = pairs * cfg.split[a] / weight;
    rem[a] = pairs * cfg.split[a] % weight;
    assigned += out[a];
  }
  while (assigned < pairs) {
    int pick = 0;
    for (int a = 1; a < 3; ++a) {
      if (rem[a] > rem[pick]) pick = a;
    }
    ++out[pick];
    rem[pick] = -1;
    ++assigned;
  }
  return out;
}

// Per-pair (axis, inverse frequency), in pair order.
struct RopeTable {
  std::vector<int> axis;
  std::vector<double> inv_freq;

  explicit RopeTable(const RopeConfig& cfg) {
    if (!(cfg.base > 0.0)) throw ConfigError("rope base must be positive");
    const auto split = rope_pair_split(cfg);
    for (int a = 0; a < 3; ++a) {
      const double d_axis = 2.0 * split[a];
      for (int k = 0; k < split[a]; ++k) {
        axis.push_back(a);
        inv_freq.push_back(std::pow(cfg.base, -2.0 * k / d_axis));
      }
    }
  }
};

inline std::vector<double> rotate(std::span<const double> v, const PositionTriple& pos, const RopeTable& table) {
  if (v.size() != 2 * table.axis.size()) {
    throw ConfigError("vector dimension " + std::to_string(v.size()) + " does not match head_dim " +
                      std::to_string(2 * table.axis.size()));
  }
  const std::array<double, 3> coord{static_cast<double>(pos.t), static_cast<double>(pos.y), static_cast<double>(pos.x)};
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < table.axis.size(); ++j) {
    const double angle = coord[table.axis[j]] * table.inv_freq[j];
    if (angle == 0.0) {
      out[2 * j] = v[2 * j];
      out[2 * j + 1] = v[2 * j + 1];
      continue;
    }
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    out[2 * j] = v[2 * j] * c - v[2 * j + 1] * s;
    out[2 * j + 1] = v[2 * j] * s + v[2 * j + 1] * c;
  }
  return out;
}

inline std::vector<double> rotate(std::span<const double> v, const PositionTriple& pos, const RopeConfig& cfg = {}) {
  return rotate(v, pos, RopeTable(cfg));
}

// Image tokens carry no temporal offset: t is dropped before rotation.
inline PositionTriple effective_position(LayoutMode mode, const PositionTriple& pos) {
  return mode == LayoutMode::image ? PositionTriple{0, pos.y, pos.x} : pos;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// <rotate(q, p_q), rotate(k, p_k)> under the mode's offset semantics.
inline double rope_score(LayoutMode mode, std::span<const double> q, const PositionTriple& pq, std::span<const double> k,
                         const PositionTriple& pk, const RopeTable& table) {
  const auto rq = rotate(q, effective_position(mode, pq), table);
  const auto rk = rotate(k, effective_position(mode, pk), table);
  return dot(rq, rk);
}

struct ModalPosition {
  LayoutMode mode = LayoutMode::codec;
  PositionTriple pos;
};

struct RelativeOffset {
  std::int64_t dt = 0;
  std::int64_t dx = 0;
  std::int64_t dy = 0;

  bool operator==(const RelativeOffset&) const = default;
};

// codec: (t_a - t_b, dx, dy); chunk: chunk-index difference in t; image: t forced to 0.
inline RelativeOffset relative_offset(LayoutMode mode, const ModalPosition& a, const ModalPosition& b) {
  if (a.mode != mode || b.mode != mode) throw ConfigError("positions come from a different layout mode");
  const std::int64_t dt = mode == LayoutMode::image ? 0 : a.pos.t - b.pos.t;
  return {dt, a.pos.x - b.pos.x, a.pos.y - b.pos.y};
}

}  // namespace codecpatch
