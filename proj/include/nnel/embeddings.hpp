// Copyright 2026 The nnel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Unit-normalized embedding matrices and the EMB1 on-disk format:
//
//   "EMB1" | version u32 | row_count u64 | dim u32 | reserved u32 |
//   row_count * dim f32 (row-major) | row_count * (u32 length + UTF-8 id)
//
// All integers and floats are little-endian regardless of host order.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nnel/error.hpp"
#include "nnel/io.hpp"
#include "nnel/kb.hpp"
#include "nnel/log.hpp"

namespace nnel {

inline constexpr std::uint32_t kEmbFormatVersion = 1;
inline constexpr std::size_t kEmbHeaderBytes = 24;
inline constexpr double kUnitNormTolerance = 1e-4;

struct EmbeddingMatrix {
  std::uint32_t dim = 0;
  std::vector<float> values;         // rows() * dim, row-major
  std::vector<std::string> row_ids;  // entry ids aligned with rows

  std::size_t rows() const { return row_ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  std::span<float> row(std::size_t i) { return {values.data() + i * dim, dim}; }
};

inline double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }
}

template <class T>
T get_le(std::string_view data, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  if (pos > data.size() || data.size() - pos < sizeof(U)) {
    throw ValidationError("EMB1: truncated file");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline std::string encode_emb1(const EmbeddingMatrix& m) {
  if (m.rows() == 0) throw ValidationError("EMB1: refusing to write an empty matrix");
  if (m.dim == 0) throw ValidationError("EMB1: dim must be positive");
  if (m.values.size() != m.rows() * m.dim) throw ValidationError("EMB1: payload size does not match rows * dim");
  std::string out;
  out.reserve(kEmbHeaderBytes + m.values.size() * 4);
  out.append("EMB1", 4);
  detail::put_le<std::uint32_t>(out, kEmbFormatVersion);
  detail::put_le<std::uint64_t>(out, m.rows());
  detail::put_le<std::uint32_t>(out, m.dim);
  detail::put_le<std::uint32_t>(out, 0);
  for (float v : m.values) detail::put_le<float>(out, v);
  for (const auto& id : m.row_ids) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.append(id);
  }
  return out;
}

inline EmbeddingMatrix decode_emb1(std::string_view data) {
  if (data.size() < kEmbHeaderBytes || data.substr(0, 4) != "EMB1") {
    throw ValidationError("EMB1: bad magic");
  }
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(data, pos);
  if (version != kEmbFormatVersion) {
    throw ValidationError("EMB1: unsupported version " + std::to_string(version));
  }
  const auto rows = detail::get_le<std::uint64_t>(data, pos);
  EmbeddingMatrix m;
  m.dim = detail::get_le<std::uint32_t>(data, pos);
  detail::get_le<std::uint32_t>(data, pos);  // reserved
  if (m.dim == 0) throw ValidationError("EMB1: dim must be positive");
  if (rows > (data.size() - pos) / (4ull * m.dim)) throw ValidationError("EMB1: truncated payload");
  m.values.resize(rows * m.dim);
  for (auto& v : m.values) v = detail::get_le<float>(data, pos);
  m.row_ids.reserve(rows);
  for (std::uint64_t r = 0; r < rows; ++r) {
    const auto len = detail::get_le<std::uint32_t>(data, pos);
    if (len > data.size() - pos) throw ValidationError("EMB1: truncated id table");
    m.row_ids.emplace_back(data.substr(pos, len));
    pos += len;
  }
  if (pos != data.size()) throw ValidationError("EMB1: trailing bytes after id table");
  return m;
}

inline void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  io::write_file(path, encode_emb1(m));
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  return decode_emb1(io::read_file(path));
}

struct AttachResult {
  EmbeddingMatrix matrix;  // rows in entry order, ids "0".."E-1"
  std::size_t renormalized = 0;
};

// Aligns `m` with the KB entries by row id, rejects non-finite values and
// rescales any row whose norm is off by more than kUnitNormTolerance.
inline AttachResult attach_embeddings(const KnowledgeBase& kb, const EmbeddingMatrix& m) {
  if (m.rows() != kb.entry_count()) {
    throw ValidationError("embedding row count " + std::to_string(m.rows()) +
                          " does not match KB entry count " + std::to_string(kb.entry_count()));
  }
  if (m.dim == 0) throw ValidationError("embedding dim must be positive");
  AttachResult out;
  out.matrix.dim = m.dim;
  out.matrix.values.assign(m.values.size(), 0.0f);
  out.matrix.row_ids.resize(m.rows());
  std::vector<bool> seen(m.rows(), false);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const std::string& id = m.row_ids[r];
    std::size_t entry = 0;
    try {
      std::size_t used = 0;
      entry = std::stoul(id, &used);
      if (used != id.size()) throw std::invalid_argument(id);
    } catch (const std::logic_error&) {
      throw ValidationError("embedding row " + std::to_string(r) + ": id '" + id + "' is not an entry id");
    }
    if (entry >= m.rows() || seen[entry]) {
      throw ValidationError("embedding row " + std::to_string(r) + ": entry id " + id + " out of range or repeated");
    }
    seen[entry] = true;
    auto src = m.row(r);
    for (float v : src) {
      if (!std::isfinite(v)) throw ValidationError("embedding row for entry " + id + " has NaN/Inf");
    }
    auto dst = out.matrix.row(entry);
    std::copy(src.begin(), src.end(), dst.begin());
    out.matrix.row_ids[entry] = std::to_string(entry);
    const double norm = l2_norm(dst);
    if (std::abs(norm - 1.0) > kUnitNormTolerance) {
      if (norm == 0.0) throw ValidationError("embedding row for entry " + id + " is all zeros");
      for (float& v : dst) v = static_cast<float>(v / norm);
      ++out.renormalized;
    }
  }
  if (out.renormalized > 0) log::warn("attach_embeddings: renormalized ", out.renormalized, " rows");
  return out;
}

inline AttachResult attach_embeddings(const KnowledgeBase& kb, const std::filesystem::path& path) {
  return attach_embeddings(kb, read_embeddings(path));
}

}  // namespace nnel
