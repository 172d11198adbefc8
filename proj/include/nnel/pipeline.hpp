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

// End-to-end retrieve -> rank -> eval, driven by a PipelineConfig.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnel/candidates.hpp"
#include "nnel/corpus.hpp"
#include "nnel/embeddings.hpp"
#include "nnel/eval.hpp"
#include "nnel/external.hpp"
#include "nnel/hash_embed.hpp"
#include "nnel/io.hpp"
#include "nnel/kb.hpp"
#include "nnel/marking.hpp"
#include "nnel/ranking.hpp"
#include "nnel/retrieval.hpp"

namespace nnel {

struct PipelineConfig {
  std::filesystem::path dictionary;
  std::filesystem::path embeddings;  // empty: hash-embed the dictionary
  std::filesystem::path corpus;
  std::size_t k = kDefaultK;
  std::size_t window = kDefaultWindow;        // rank-input context window
  std::size_t query_window = kDefaultWindow;  // retrieval query window (0 = bare mention)
  bool marking = true;
  RankMode mode = RankMode::kCl;
  ScorerSpec scorer{};
  std::string embedder_endpoint;  // empty: hash embedder
  std::size_t hash_dim = 256;
  std::uint64_t seed = 13;
  std::size_t folds = 5;
  bool cross_validate = false;
  std::size_t threads = 0;  // 0 = all cores; never affects results
  protocol::ClientOptions client{};  // external scorer/embedder transport

  void validate() const {
    if (k < 1) throw ValidationError("k must be at least 1");
    if (hash_dim < kHashEmbedMinDim) {
      throw ValidationError("hash_dim must be at least " + std::to_string(kHashEmbedMinDim));
    }
    if (cross_validate && folds < 2) throw ValidationError("folds must be at least 2");
    scorer.validate();
    if (scorer.mode != mode) throw ValidationError("scorer mode differs from rank mode");
    for (const auto& [name, p] : {std::pair{"dictionary", dictionary}, std::pair{"corpus", corpus}}) {
      if (p.empty()) throw ValidationError(std::string(name) + " path is required");
      if (!std::filesystem::exists(p)) throw ValidationError(std::string(name) + " not found: " + p.string());
    }
    if (!embeddings.empty() && !std::filesystem::exists(embeddings)) {
      throw ValidationError("embeddings not found: " + embeddings.string());
    }
  }

  MarkOptions rank_marking() const { return {window, marking}; }
  MarkOptions query_marking() const { return {query_window, marking}; }
};

// Everything that can change results. `threads` is deliberately absent so
// reports are comparable across machines.
inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"dictionary", c.dictionary.generic_string()},
          {"embeddings", c.embeddings.generic_string()},
          {"corpus", c.corpus.generic_string()},
          {"k", c.k},
          {"window", c.window},
          {"query_window", c.query_window},
          {"marking", c.marking},
          {"mode", to_string(c.mode)},
          {"scorer", c.scorer.kind == ScorerKind::kExternal ? "external" : "lexical"},
          {"endpoint", c.scorer.endpoint},
          {"embedder", c.embedder_endpoint.empty() ? "hash" : c.embedder_endpoint},
          {"hash_dim", c.hash_dim},
          {"seed", c.seed},
          {"folds", c.folds},
          {"cv", c.cross_validate}};
}

struct LoadedKb {
  KnowledgeBase kb;
  EmbeddingMatrix matrix;
  std::size_t renormalized = 0;
};

inline LoadedKb load_kb(const PipelineConfig& c) {
  LoadedKb out;
  out.kb = ingest_dictionary(c.dictionary);
  if (c.embeddings.empty()) {
    out.matrix = hash_embed_dictionary(out.kb, c.hash_dim, c.threads);
  } else {
    auto attached = attach_embeddings(out.kb, c.embeddings);
    out.matrix = std::move(attached.matrix);
    out.renormalized = attached.renormalized;
  }
  return out;
}

inline std::unique_ptr<EmbeddingProvider> make_provider(const PipelineConfig& c, std::size_t dim) {
  if (c.embedder_endpoint.empty()) return std::make_unique<HashEmbeddingProvider>(dim, c.threads);
  return std::make_unique<ExternalEmbeddingProvider>(c.embedder_endpoint, c.client);
}

inline std::unique_ptr<Scorer> make_scorer(const PipelineConfig& c) {
  if (c.scorer.kind == ScorerKind::kExternal) return std::make_unique<ExternalScorer>(c.scorer, c.client);
  return std::make_unique<LexicalScorer>(c.threads);
}

// Tracks with at least one mention, in EN, RU, BI order. BI is always
// present when the corpus has any mention.
inline std::vector<Track> tracks_present(const CorpusSplit& split) {
  bool en = false, ru = false;
  for (const auto& d : split.documents) {
    if (d.mentions.empty()) continue;
    (d.language == Language::kEn ? en : ru) = true;
  }
  std::vector<Track> tracks;
  if (en) tracks.push_back(Track::kEn);
  if (ru) tracks.push_back(Track::kRu);
  if (en || ru) tracks.push_back(Track::kBi);
  return tracks;
}

inline std::vector<RankedCandidates> select_mentions(const std::vector<RankedCandidates>& ranked,
                                                     const CorpusSplit& subset) {
  std::unordered_set<std::string> ids;
  for (const auto& d : subset.documents) {
    for (const auto& m : d.mentions) ids.insert(m.mention_id);
  }
  std::vector<RankedCandidates> out;
  for (const auto& r : ranked) {
    if (ids.count(r.mention_id)) out.push_back(r);
  }
  return out;
}

struct PipelineResult {
  std::vector<CandidateList> retrieval;
  std::vector<RankedCandidates> ranked;
  std::vector<EvalReport> reports;     // one per track present
  std::vector<EvalReport> retrieval_reports;  // Acc@k of the retrieval order
  InvarianceReport invariance;
};

// Per-track Acc@k reports for ranked output. With cross-validation the
// per-fold scores come from the already ranked held-out mentions: nothing
// in the engine is trained on the other folds.
inline std::vector<EvalReport> evaluate_tracks(const CorpusSplit& split,
                                               const std::vector<RankedCandidates>& ranked,
                                               const PipelineConfig& c, bool with_cv) {
  std::vector<EvalReport> reports;
  const GoldMap gold = gold_map(split);
  const auto types = mention_types(split);
  for (Track t : tracks_present(split)) {
    const CorpusSplit subset = track_subset(split, t);
    EvalReport rep = accuracy_at_k(select_mentions(ranked, subset), gold, kDefaultKs, t, &types);
    if (with_cv) {
      const EvalReport cv = cross_validate(
          subset, c.folds, c.seed,
          [&](const CorpusSplit&, const CorpusSplit& heldout) { return select_mentions(ranked, heldout); }, t);
      rep.fold_accs = cv.fold_accs;
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

inline PipelineResult run_pipeline(const PipelineConfig& c, const LoadedKb& loaded, const CorpusSplit& split) {
  PipelineResult out;
  auto provider = make_provider(c, loaded.matrix.dim);
  RetrieveOptions ropts;
  ropts.k = c.k;
  ropts.marking = c.query_marking();
  ropts.threads = c.threads;
  out.retrieval = retrieve_corpus(split, loaded.kb, loaded.matrix, *provider, ropts).lists;
  auto scorer = make_scorer(c);
  out.ranked = rank_corpus(split, out.retrieval, loaded.kb, *scorer, c.mode, c.rank_marking(), c.threads);
  const GoldMap gold = gold_map(split);
  out.invariance = rank_invariance_check(out.retrieval, out.ranked, gold);
  out.reports = evaluate_tracks(split, out.ranked, c, c.cross_validate);
  std::vector<RankedCandidates> retrieval_order;
  for (const auto& l : out.retrieval) retrieval_order.push_back(as_ranked(l));
  out.retrieval_reports = evaluate_tracks(split, retrieval_order, c, false);
  return out;
}

inline PipelineResult run_pipeline(const PipelineConfig& c) {
  c.validate();
  const LoadedKb loaded = load_kb(c);
  const CorpusSplit split = parse_jsonl_corpus(c.corpus);
  return run_pipeline(c, loaded, split);
}

inline nlohmann::json report_json(const PipelineConfig& c, const PipelineResult& r) {
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& rep : r.reports) reports.push_back(to_json(rep));
  nlohmann::json retrieval = nlohmann::json::array();
  for (const auto& rep : r.retrieval_reports) retrieval.push_back(to_json(rep));
  return {{"config", to_json(c)}, {"reports", std::move(reports)},
          {"retrieval", std::move(retrieval)}, {"invariance", to_json(r.invariance)}};
}

}  // namespace nnel
