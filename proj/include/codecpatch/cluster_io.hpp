#pragma once

// Embedding and centroid bank files share one layout:
//   {"OVEM", D u32, N u32, modality u8} + N x D f32 row-major, little-endian.

#include <filesystem>
#include <string>
#include <vector>

#include "codecpatch/binary_io.hpp"
#include "codecpatch/cluster.hpp"
#include "codecpatch/error.hpp"

namespace codecpatch {

struct MatrixFile {
  std::uint32_t dim = 0;
  std::uint32_t rows = 0;
  Modality modality = Modality::obj;
  std::vector<float> values;
};

inline std::vector<std::uint8_t> encode_matrix(const MatrixFile& m) {
  if (m.values.size() != std::size_t{m.dim} * m.rows) throw InvariantError("matrix size mismatch");
  io::ByteWriter w;
  w.tag("OVEM");
  w.u32(m.dim);
  w.u32(m.rows);
  w.u8(static_cast<std::uint8_t>(m.modality));
  for (float v : m.values) w.f32(v);
  return w.bytes();
}

inline MatrixFile decode_matrix(const std::vector<std::uint8_t>& bytes, const std::string& source = "matrix") {
  io::ByteReader r(bytes.data(), bytes.size(), source);
  if (!r.tag("OVEM")) throw IoError(source + ": bad magic");
  MatrixFile m;
  m.dim = r.u32();
  m.rows = r.u32();
  const std::uint8_t modality = r.u8();
  if (modality > 1) throw IoError(source + ": invalid modality " + std::to_string(modality));
  m.modality = static_cast<Modality>(modality);
  if (m.dim == 0) throw IoError(source + ": zero dimension");
  if (r.remaining() != std::size_t{m.dim} * m.rows * 4) throw IoError(source + ": payload size does not match header");
  m.values.resize(std::size_t{m.dim} * m.rows);
  for (auto& v : m.values) v = r.f32();
  return m;
}

inline std::vector<Embedding> read_embeddings(const std::filesystem::path& path) {
  const auto m = decode_matrix(io::read_file(path), path.string());
  std::vector<Embedding> out;
  out.reserve(m.rows);
  for (std::uint32_t i = 0; i < m.rows; ++i) {
    const float* row = m.values.data() + std::size_t{i} * m.dim;
    out.emplace_back(std::vector<double>(row, row + m.dim), m.modality, i);
  }
  return out;
}

inline void write_embeddings(const std::filesystem::path& path, std::span<const Embedding> embeddings) {
  if (embeddings.empty()) throw ConfigError("no embeddings to write");
  MatrixFile m{static_cast<std::uint32_t>(embeddings.front().dim()), static_cast<std::uint32_t>(embeddings.size()),
               embeddings.front().modality(), {}};
  for (const auto& e : embeddings) {
    if (e.dim() != m.dim || e.modality() != m.modality) throw ConfigError("embeddings differ in dimension or modality");
    for (double v : e.values()) m.values.push_back(static_cast<float>(v));
  }
  io::write_file(path, encode_matrix(m));
}

inline CentroidBank read_bank(const std::filesystem::path& path) {
  const auto m = decode_matrix(io::read_file(path), path.string());
  if (m.rows == 0) throw IoError(path.string() + ": empty bank");
  return {m.modality, m.dim, std::vector<double>(m.values.begin(), m.values.end())};
}

inline void write_bank(const std::filesystem::path& path, const CentroidBank& bank) {
  MatrixFile m{static_cast<std::uint32_t>(bank.dim), static_cast<std::uint32_t>(bank.size()), bank.modality, {}};
  for (double v : bank.data) m.values.push_back(static_cast<float>(v));
  io::write_file(path, encode_matrix(m));
}

}  // namespace codecpatch
