#pragma once

// Token layout exchange files:
//   <name>.ovpt.json  metadata
//   <name>.ovpt.bin   per token, little-endian, no header:
//                     t_virtual u16, y u16, x u16, frame_type u8, source_t u16,
//                     payload patch_size*patch_size*3 u8

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codecpatch/binary_io.hpp"
#include "codecpatch/error.hpp"
#include "codecpatch/patchify.hpp"

namespace codecpatch {

inline constexpr int kLayoutFormatVersion = 1;
inline constexpr const char* kLayoutOrdering = "spec-v1";

inline std::size_t token_record_size(int patch_size) {
  return 9 + static_cast<std::size_t>(patch_size) * patch_size * 3;
}

struct LayoutPaths {
  std::filesystem::path json;
  std::filesystem::path bin;
};

// Accepts "<dir>/<name>", "<dir>/<name>.ovpt.json" or "<dir>/<name>.ovpt.bin".
inline LayoutPaths layout_paths(const std::filesystem::path& base) {
  std::string s = base.string();
  for (const char* suffix : {".ovpt.json", ".ovpt.bin"}) {
    const std::string suf(suffix);
    if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
      s.resize(s.size() - suf.size());
      break;
    }
  }
  return {s + ".ovpt.json", s + ".ovpt.bin"};
}

inline nlohmann::json layout_header(const TokenLayout& layout) {
  nlohmann::json j = layout.metadata.is_object() ? layout.metadata : nlohmann::json::object();
  const auto& b = layout.budget_meta;
  j["format_version"] = kLayoutFormatVersion;
  j["ordering"] = kLayoutOrdering;
  j["mode"] = to_string(layout.mode);
  j["grid_T"] = layout.grid_T;
  j["P0"] = layout.patches_per_frame();
  j["patch_size"] = layout.patch_size;
  j["grid_h"] = layout.grid_h;
  j["grid_w"] = layout.grid_w;
  j["dense_T"] = layout.dense_T;
  j["clip_ref"] = layout.clip_ref;
  j["token_count"] = layout.tokens.size();
  j["budget_meta"] = {{"P0", b.patches_per_frame},
                      {"budget", b.budget ? nlohmann::json(*b.budget) : nlohmann::json()},
                      {"i_frames", b.i_frames},
                      {"r", b.ratio ? nlohmann::json(*b.ratio) : nlohmann::json()},
                      {"C", b.chunks ? nlohmann::json(*b.chunks) : nlohmann::json()}};
  nlohmann::json gops = nlohmann::json::array();
  for (const auto& g : layout.gops) gops.push_back({g.start, g.length});
  j["gops"] = gops;
  return j;
}

inline std::vector<std::uint8_t> encode_tokens(const TokenLayout& layout) {
  io::ByteWriter w;
  for (const auto& t : layout.tokens) {
    if (t.payload.size() != layout.payload_size()) throw InvariantError("token payload size mismatch");
    w.u16(t.t_virtual);
    w.u16(t.y);
    w.u16(t.x);
    w.u8(static_cast<std::uint8_t>(t.frame_type));
    w.u16(t.source_t);
    w.raw(t.payload.data(), t.payload.size());
  }
  return w.bytes();
}

inline void write_layout(const std::filesystem::path& base, const TokenLayout& layout) {
  const auto paths = layout_paths(base);
  io::write_file(paths.bin, encode_tokens(layout));
  io::write_text(paths.json, layout_header(layout).dump(2) + "\n");
}

inline TokenLayout decode_layout(const nlohmann::json& header, const std::vector<std::uint8_t>& bin,
                                 const std::string& source = "layout") {
  TokenLayout layout;
  std::size_t count = 0;
  try {
    if (header.at("format_version").get<int>() != kLayoutFormatVersion) {
      throw IoError(source + ": unsupported format version");
    }
    if (header.at("ordering").get<std::string>() != kLayoutOrdering) throw IoError(source + ": unknown token ordering");
    layout.mode = parse_layout_mode(header.at("mode").get<std::string>());
    layout.grid_T = header.at("grid_T").get<int>();
    layout.patch_size = header.at("patch_size").get<int>();
    layout.grid_h = header.at("grid_h").get<int>();
    layout.grid_w = header.at("grid_w").get<int>();
    layout.dense_T = header.at("dense_T").get<int>();
    layout.clip_ref = header.at("clip_ref").get<std::string>();
    count = header.at("token_count").get<std::size_t>();
    const auto& b = header.at("budget_meta");
    layout.budget_meta.patches_per_frame = b.at("P0").get<int>();
    if (!b.at("budget").is_null()) layout.budget_meta.budget = b.at("budget").get<std::int64_t>();
    layout.budget_meta.i_frames = b.at("i_frames").get<int>();
    if (!b.at("r").is_null()) layout.budget_meta.ratio = b.at("r").get<double>();
    if (!b.at("C").is_null()) layout.budget_meta.chunks = b.at("C").get<int>();
    for (const auto& g : header.at("gops")) layout.gops.push_back({g.at(0).get<int>(), g.at(1).get<int>()});
    if (header.at("P0").get<int>() != layout.patches_per_frame()) throw IoError(source + ": P0 disagrees with grid");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(source + ": malformed metadata: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(source + ": " + e.what());
  }
  if (layout.patch_size < 1 || layout.grid_h < 1 || layout.grid_w < 1 || layout.grid_T < 1) {
    throw IoError(source + ": malformed metadata: bad geometry");
  }

  nlohmann::json metadata = header;
  for (const char* key : {"format_version", "ordering", "mode", "grid_T", "P0", "patch_size", "grid_h", "grid_w", "dense_T",
                          "clip_ref", "token_count", "budget_meta", "gops"}) {
    metadata.erase(key);
  }
  layout.metadata = metadata;

  const std::size_t record = token_record_size(layout.patch_size);
  if (bin.size() != count * record) {
    throw IoError(source + ": binary holds " + std::to_string(bin.size()) + " bytes, expected " +
                  std::to_string(count * record) + " for " + std::to_string(count) + " tokens");
  }
  io::ByteReader r(bin.data(), bin.size(), source);
  layout.tokens.resize(count);
  for (auto& t : layout.tokens) {
    t.t_virtual = r.u16();
    t.y = r.u16();
    t.x = r.u16();
    const std::uint8_t type = r.u8();
    if (type > 3) throw IoError(source + ": invalid frame type " + std::to_string(type));
    t.frame_type = static_cast<FrameType>(type);
    t.source_t = r.u16();
    const std::uint8_t* p = r.take(layout.payload_size());
    t.payload.assign(p, p + layout.payload_size());
    if (t.t_virtual >= layout.grid_T || t.y >= layout.grid_h || t.x >= layout.grid_w) {
      throw IoError(source + ": token position outside the grid");
    }
  }
  return layout;
}

inline TokenLayout read_layout(const std::filesystem::path& base) {
  const auto paths = layout_paths(base);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(io::read_text(paths.json));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(paths.json.string() + ": " + e.what());
  }
  return decode_layout(header, io::read_file(paths.bin), paths.bin.string());
}

}  // namespace codecpatch
