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

// Exact top-k cosine retrieval over a unit-normalized entry matrix, reduced
// to distinct CUIs (each CUI keeps its best-scoring synonym).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nnel/candidates.hpp"
#include "nnel/corpus.hpp"
#include "nnel/embeddings.hpp"
#include "nnel/error.hpp"
#include "nnel/hash_embed.hpp"
#include "nnel/kb.hpp"
#include "nnel/marking.hpp"
#include "nnel/parallel.hpp"

namespace nnel {

inline constexpr std::size_t kDefaultK = 10;

struct QueryText {
  std::string id;
  std::string text;
};

// Turns query texts into vectors. Implementations may batch; the result
// must be aligned with the input.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<float>> embed(std::span<const QueryText> batch) = 0;
};

class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim, std::size_t threads = 0)
      : dim_(dim), threads_(threads) {}

  std::vector<std::vector<float>> embed(std::span<const QueryText> batch) override {
    std::vector<std::vector<float>> out(batch.size());
    parallel_for(batch.size(), threads_, [&](std::size_t i) {
      try {
        out[i] = hash_embed(batch[i].text, dim_);
      } catch (const Error& e) {
        throw ValidationError("mention " + batch[i].id + ": " + e.what());
      }
    });
    return out;
  }

 private:
  std::size_t dim_;
  std::size_t threads_;
};

// Checks the dimension and rescales to unit norm.
inline std::vector<float> finish_query_vector(std::vector<float> v, std::size_t dim,
                                              const std::string& mention_id) {
  if (v.size() != dim) {
    throw ValidationError("mention " + mention_id + ": query dimension " + std::to_string(v.size()) +
                          " does not match matrix dimension " + std::to_string(dim));
  }
  const double norm = l2_norm(v);
  if (!std::isfinite(norm) || norm == 0.0) {
    throw ValidationError("mention " + mention_id + ": query vector is zero or non-finite");
  }
  if (std::abs(norm - 1.0) > kUnitNormTolerance) {
    for (float& x : v) x = static_cast<float>(x / norm);
  }
  return v;
}

inline QueryText query_text(const LinkedMention& mention, const Document& doc,
                            const MarkOptions& opts) {
  return {mention.mention_id, mark(mention, doc, opts).text};
}

inline std::vector<float> embed_query(const LinkedMention& mention, const Document& doc,
                                      EmbeddingProvider& provider, std::size_t dim,
                                      const MarkOptions& opts = {}) {
  const QueryText q = query_text(mention, doc, opts);
  auto vectors = provider.embed(std::span<const QueryText>(&q, 1));
  if (vectors.size() != 1) throw RuntimeFailure("mention " + mention.mention_id + ": provider returned no vector");
  return finish_query_vector(std::move(vectors.front()), dim, mention.mention_id);
}

// Scores every entry by dot product (= cosine for unit rows), keeps each
// CUI's best entry, and returns the k best CUIs. Ties are broken by
// ascending entry id. Fewer than k results only when the KB has fewer CUIs.
inline CandidateList retrieve(std::span<const float> query, const KnowledgeBase& kb,
                              const EmbeddingMatrix& matrix, std::size_t k) {
  if (k == 0) throw UsageError("k must be at least 1");
  if (matrix.rows() != kb.entry_count()) {
    throw ValidationError("embedding matrix is not attached to this knowledge base");
  }
  if (query.size() != matrix.dim) {
    throw ValidationError("query dimension " + std::to_string(query.size()) +
                          " does not match matrix dimension " + std::to_string(matrix.dim));
  }
  constexpr EntryId kNone = std::numeric_limits<EntryId>::max();
  const std::size_t n_concepts = kb.concepts().size();
  std::vector<double> best(n_concepts, -std::numeric_limits<double>::infinity());
  std::vector<EntryId> best_entry(n_concepts, kNone);
  const auto& entries = kb.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const double s = dot(query, matrix.row(e));
    const std::size_t c = entries[e].concept_index;
    // Entries are visited in ascending id order, so strict '>' keeps the
    // lowest id among equal scores.
    if (s > best[c] || best_entry[c] == kNone) {
      best[c] = s;
      best_entry[c] = static_cast<EntryId>(e);
    }
  }
  std::vector<std::size_t> order(n_concepts);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, n_concepts);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (best[a] != best[b]) return best[a] > best[b];
                      return best_entry[a] < best_entry[b];
                    });
  CandidateList out;
  out.k_requested = k;
  out.candidates.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t c = order[i];
    out.candidates.push_back({kb.concepts()[c].cui, best_entry[c], best[c]});
  }
  return out;
}

struct RetrieveOptions {
  std::size_t k = kDefaultK;
  MarkOptions marking{};
  std::size_t threads = 0;
  // Skip mentions whose query fails instead of aborting the whole run.
  bool keep_going = false;
};

struct RetrievalFailure {
  std::string mention_id;
  std::string message;
};

struct CorpusRetrieval {
  std::vector<CandidateList> lists;  // corpus mention order
  std::vector<RetrievalFailure> failures;
};

inline CorpusRetrieval retrieve_corpus(const CorpusSplit& split, const KnowledgeBase& kb,
                                       const EmbeddingMatrix& matrix, EmbeddingProvider& provider,
                                       const RetrieveOptions& opts = {}) {
  if (opts.k == 0) throw UsageError("k must be at least 1");
  std::vector<QueryText> queries;
  for (const auto& doc : split.documents) {
    for (const auto& m : doc.mentions) queries.push_back(query_text(m, doc, opts.marking));
  }
  CorpusRetrieval out;
  if (queries.empty()) return out;
  auto vectors = provider.embed(queries);
  if (vectors.size() != queries.size()) {
    throw RuntimeFailure("embedding provider returned " + std::to_string(vectors.size()) +
                         " vectors for " + std::to_string(queries.size()) + " queries");
  }
  std::vector<CandidateList> slots(queries.size());
  std::vector<std::string> errors(queries.size());
  parallel_for(queries.size(), opts.threads, [&](std::size_t i) {
    try {
      const auto q = finish_query_vector(std::move(vectors[i]), matrix.dim, queries[i].id);
      slots[i] = retrieve(q, kb, matrix, opts.k);
      slots[i].mention_id = queries[i].id;
    } catch (const Error& e) {
      if (!opts.keep_going) throw;
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (errors[i].empty()) {
      out.lists.push_back(std::move(slots[i]));
    } else {
      out.failures.push_back({queries[i].id, std::move(errors[i])});
    }
  }
  return out;
}

}  // namespace nnel
