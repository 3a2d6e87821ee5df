#pragma once

// `.sig` sidecar: little-endian
//   header  {"OVSG", version u32, frames u32, H u32, W u32, block u32}
//   records {frame_index u32, ref_index u32,
//            (dy i16, dx i16) per block row-major,
//            residual energy f32 per pixel row-major}
// one record per P-frame; I-frames have no record.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "codecpatch/binary_io.hpp"
#include "codecpatch/error.hpp"
#include "codecpatch/ingest.hpp"
#include "codecpatch/motion.hpp"

namespace codecpatch {

inline constexpr std::uint32_t kSignalsVersion = 1;

struct SignalsFile {
  std::uint32_t frames = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t block_size = 16;
  ClipSignals records;
};

inline std::vector<std::uint8_t> encode_signals(const SignalsFile& file) {
  io::ByteWriter w;
  w.tag("OVSG");
  w.u32(kSignalsVersion);
  w.u32(file.frames);
  w.u32(file.height);
  w.u32(file.width);
  w.u32(file.block_size);
  for (const auto& rec : file.records) {
    const auto& m = rec.motion;
    if (m.height != static_cast<int>(file.height) || m.width != static_cast<int>(file.width) ||
        m.block_size != static_cast<int>(file.block_size) || rec.residual.energy.size() != std::size_t{file.height} * file.width) {
      throw InvariantError("signal record geometry does not match sidecar header");
    }
    w.u32(m.frame_index);
    w.u32(m.reference_index);
    for (const auto& v : m.vectors) {
      w.i16(v.dy);
      w.i16(v.dx);
    }
    for (float e : rec.residual.energy) w.f32(e);
  }
  return w.bytes();
}

inline SignalsFile decode_signals(const std::vector<std::uint8_t>& bytes, const std::string& source = "signals") {
  io::ByteReader r(bytes.data(), bytes.size(), source);
  if (!r.tag("OVSG")) throw IoError(source + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kSignalsVersion) throw IoError(source + ": unsupported version " + std::to_string(version));
  SignalsFile file;
  file.frames = r.u32();
  file.height = r.u32();
  file.width = r.u32();
  file.block_size = r.u32();
  const int b = static_cast<int>(file.block_size);
  if (b < 4 || b > 64 || (b & (b - 1)) != 0 || file.height == 0 || file.width == 0 || file.height > 1u << 15 ||
      file.width > 1u << 15) {
    throw IoError(source + ": malformed header");
  }
  const int by = block_grid_extent(static_cast<int>(file.height), b);
  const int bx = block_grid_extent(static_cast<int>(file.width), b);
  const std::size_t pixels = std::size_t{file.height} * file.width;
  const std::size_t record_bytes = 8 + static_cast<std::size_t>(by) * bx * 4 + pixels * 4;
  if (r.remaining() % record_bytes != 0) throw IoError(source + ": malformed record (truncated or trailing bytes)");

  while (r.remaining() > 0) {
    FrameSignals rec;
    auto& m = rec.motion;
    m.height = static_cast<int>(file.height);
    m.width = static_cast<int>(file.width);
    m.block_size = b;
    m.blocks_y = by;
    m.blocks_x = bx;
    m.frame_index = r.u32();
    m.reference_index = r.u32();
    m.vectors.resize(static_cast<std::size_t>(by) * bx);
    for (auto& v : m.vectors) {
      v.dy = r.i16();
      v.dx = r.i16();
    }
    rec.residual = {m.height, m.width, std::vector<float>(pixels), m.frame_index};
    for (auto& e : rec.residual.energy) {
      e = r.f32();
      if (!(e >= 0.0f) || !std::isfinite(e)) throw IoError(source + ": malformed record (invalid residual energy)");
    }
    file.records.push_back(std::move(rec));
  }
  return file;
}

inline void write_signals(const std::filesystem::path& path, const SignalsFile& file) {
  io::write_file(path, encode_signals(file));
}

inline SignalsFile read_signals(const std::filesystem::path& path) {
  return decode_signals(io::read_file(path), path.string());
}

inline SignalsFile make_signals_file(const RawClip& clip, int block_size, ClipSignals records) {
  return {static_cast<std::uint32_t>(clip.num_frames()), static_cast<std::uint32_t>(clip.height()),
          static_cast<std::uint32_t>(clip.width()), static_cast<std::uint32_t>(block_size), std::move(records)};
}

// Checks a decoded sidecar against the clip and its GOP structure and returns
// the records ordered by frame index, one per P-frame.
inline ClipSignals validate_signals(SignalsFile file, const RawClip& clip, const GopPartition& gops,
                                    const std::string& source = "signals") {
  if (file.frames != static_cast<std::uint32_t>(clip.num_frames())) {
    throw IoError(source + ": frame count mismatch (sidecar " + std::to_string(file.frames) + ", clip " +
                  std::to_string(clip.num_frames()) + ")");
  }
  if (file.height != static_cast<std::uint32_t>(clip.height()) || file.width != static_cast<std::uint32_t>(clip.width())) {
    throw IoError(source + ": geometry mismatch");
  }
  std::vector<const FrameSignals*> by_frame(clip.frames.size(), nullptr);
  for (const auto& rec : file.records) {
    const auto t = rec.motion.frame_index;
    if (t >= by_frame.size()) throw IoError(source + ": malformed record (frame " + std::to_string(t) + " out of range)");
    if (by_frame[t] != nullptr) throw IoError(source + ": malformed record (duplicate frame " + std::to_string(t) + ")");
    if (gops.is_i_frame(static_cast<int>(t))) {
      throw IoError(source + ": malformed record (I-frame " + std::to_string(t) + " carries signals)");
    }
    const auto ref = rec.motion.reference_index;
    if (ref >= t || gops.segment_of(static_cast<int>(ref)) != gops.segment_of(static_cast<int>(t))) {
      throw IoError(source + ": malformed record (frame " + std::to_string(t) + " references " + std::to_string(ref) + ")");
    }
    by_frame[t] = &rec;
  }
  ClipSignals out;
  for (int t : gops.p_frames()) {
    if (by_frame[t] == nullptr) throw IoError(source + ": missing frame " + std::to_string(t));
    out.push_back(*by_frame[t]);
  }
  return out;
}

inline ClipSignals import_codec_signals(const std::filesystem::path& path, const RawClip& clip, const GopPartition& gops) {
  return validate_signals(read_signals(path), clip, gops, path.string());
}

}  // namespace codecpatch
