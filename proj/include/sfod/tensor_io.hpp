// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

// Binary interchange formats. All integers are little-endian uint32, all
// values little-endian IEEE-754 float32.
//
// Named tensor file (model parameters, EMA state):
//   "SFODTNS1"                     8-byte magic
//   u32 count
//   count x { u32 name_len, name bytes (UTF-8), u32 ndim, u32 dims[ndim],
//             f32 values[prod(dims)] }
//
// Embedding file (text or image embeddings imported from outside):
//   "SFODEMB1"                     8-byte magic
//   u32 rows, u32 dim, u32 flags   bit0 = rows are L2-normalized
//                                  bit1 = row keys present
//   if keys: rows x { u32 len, key bytes }
//   f32 values[rows * dim]         row-major
//
// Readers reject bad magic, truncation and trailing bytes.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "sfod/core/error.hpp"
#include "sfod/core/image_io.hpp"
#include "sfod/core/matrix.hpp"
#include "sfod/pseudo_label.hpp"

namespace sfod {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)),
        values(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()), fill) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()) != values.size())
      throw DataError("tensor shape does not match value count");
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Parameters by name; std::map keeps iteration (and file) order stable.
using NamedTensors = std::map<std::string, Tensor>;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string what) : b_(bytes), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw IoError(what_ + ": truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect_end() const {
    if (pos_ != b_.size()) throw IoError(what_ + ": unexpected trailing bytes");
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr char kTensorMagic[] = "SFODTNS1";
inline constexpr char kEmbeddingMagic[] = "SFODEMB1";

inline std::vector<std::uint8_t> encode_tensors(const NamedTensors& ts) {
  std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 8);
  detail::put_u32(out, static_cast<std::uint32_t>(ts.size()));
  for (const auto& [name, t] : ts) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values) detail::put_f32(out, v);
  }
  return out;
}

inline NamedTensors decode_tensors(const std::vector<std::uint8_t>& bytes) {
  detail::Reader r(bytes, "tensor file");
  if (r.bytes(8) != std::string(kTensorMagic, 8)) throw IoError("tensor file: bad magic");
  NamedTensors ts;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32());
    const std::uint32_t ndim = r.u32();
    std::vector<std::size_t> shape;
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(r.u32());
      n *= shape.back();
    }
    r.need(4 * n);
    std::vector<double> vals(n);
    for (auto& v : vals) v = r.f32();
    if (!ts.emplace(name, Tensor(std::move(shape), std::move(vals))).second)
      throw IoError("tensor file: duplicate tensor '" + name + "'");
  }
  r.expect_end();
  return ts;
}

inline void save_tensors(const std::filesystem::path& path, const NamedTensors& ts) {
  auto bytes = encode_tensors(ts);
  write_file_bytes(path, bytes.data(), bytes.size());
}

inline NamedTensors load_tensors(const std::filesystem::path& path) {
  return decode_tensors(read_file_bytes(path));
}

/// Embeddings plus optional per-row keys (class names or patch ids).
struct KeyedEmbeddings {
  EmbeddingMatrix matrix;
  std::vector<std::string> keys;  // empty or one per row
};

inline std::vector<std::uint8_t> encode_embeddings(const KeyedEmbeddings& e) {
  const auto& m = e.matrix.values;
  if (!e.keys.empty() && e.keys.size() != m.rows)
    throw DataError("embedding keys: " + std::to_string(e.keys.size()) + " keys for " +
                    std::to_string(m.rows) + " rows");
  std::vector<std::uint8_t> out(kEmbeddingMagic, kEmbeddingMagic + 8);
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols));
  detail::put_u32(out, (e.matrix.normalized ? 1u : 0u) | (e.keys.empty() ? 0u : 2u));
  for (const auto& k : e.keys) {
    detail::put_u32(out, static_cast<std::uint32_t>(k.size()));
    out.insert(out.end(), k.begin(), k.end());
  }
  for (double v : m.data) detail::put_f32(out, v);
  return out;
}

inline KeyedEmbeddings decode_embeddings(const std::vector<std::uint8_t>& bytes) {
  detail::Reader r(bytes, "embedding file");
  if (r.bytes(8) != std::string(kEmbeddingMagic, 8)) throw IoError("embedding file: bad magic");
  const std::uint32_t rows = r.u32(), dim = r.u32(), flags = r.u32();
  if (flags & ~3u) throw IoError("embedding file: unknown flag bits " + std::to_string(flags));
  KeyedEmbeddings e;
  e.matrix.normalized = flags & 1u;
  if (flags & 2u)
    for (std::uint32_t i = 0; i < rows; ++i) e.keys.push_back(r.bytes(r.u32()));
  r.need(4 * static_cast<std::size_t>(rows) * dim);
  e.matrix.values = Matrix(rows, dim);
  for (auto& v : e.matrix.values.data) v = r.f32();
  r.expect_end();
  return e;
}

inline void save_embeddings(const std::filesystem::path& path, const KeyedEmbeddings& e) {
  auto bytes = encode_embeddings(e);
  write_file_bytes(path, bytes.data(), bytes.size());
}

inline KeyedEmbeddings load_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file_bytes(path));
}

}  // namespace sfod
