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

// Deterministic model-free embedder: signed feature hashing of character
// 3-grams of the lowercased NFC text, L2-normalized.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nnel/embeddings.hpp"
#include "nnel/error.hpp"
#include "nnel/kb.hpp"
#include "nnel/parallel.hpp"
#include "nnel/unicode.hpp"

namespace nnel {

inline constexpr std::uint64_t kHashEmbedSeed = 0x6e6e656c5f763031ull;  // "nnel_v01"
inline constexpr std::size_t kHashEmbedMinDim = 8;

namespace detail {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

inline std::uint64_t hash_gram(std::u32string_view gram) {
  return detail::mix64(detail::fnv1a64(unicode::encode(gram)) ^ kHashEmbedSeed);
}

inline std::vector<float> hash_embed(std::string_view text, std::size_t dim) {
  if (dim < kHashEmbedMinDim) {
    throw ValidationError("hash_embed: dim must be at least " + std::to_string(kHashEmbedMinDim));
  }
  const auto grams = unicode::char_ngrams(unicode::lower_nfc(text), 3);
  if (grams.empty()) throw ValidationError("hash_embed: text has no character n-grams");
  std::vector<double> acc(dim, 0.0);
  for (const auto& g : grams) {
    const std::uint64_t h = hash_gram(g);
    acc[h % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  // Every gram cancelled against another with the opposite sign.
  if (norm == 0.0) {
    acc[grams.size() % dim] = 1.0;
    norm = 1.0;
  }
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

// One hash-embedded row per KB entry, in entry order.
inline EmbeddingMatrix hash_embed_dictionary(const KnowledgeBase& kb, std::size_t dim,
                                             std::size_t threads = 0) {
  EmbeddingMatrix m;
  m.dim = static_cast<std::uint32_t>(dim);
  m.values.resize(kb.entry_count() * dim);
  m.row_ids.resize(kb.entry_count());
  parallel_for(kb.entry_count(), threads, [&](std::size_t i) {
    const auto v = hash_embed(kb.entries()[i].name, dim);
    std::copy(v.begin(), v.end(), m.row(i).begin());
    m.row_ids[i] = std::to_string(i);
  });
  return m;
}

}  // namespace nnel
