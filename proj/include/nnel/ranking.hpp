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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nnel/candidates.hpp"
#include "nnel/corpus.hpp"
#include "nnel/error.hpp"
#include "nnel/kb.hpp"
#include "nnel/marking.hpp"
#include "nnel/parallel.hpp"
#include "nnel/unicode.hpp"

namespace nnel {

// Sorensen-Dice coefficient over character 3-gram multisets of the
// lowercased NFC strings.
inline double trigram_dice(std::string_view a, std::string_view b) {
  const auto ga = unicode::char_ngrams(unicode::lower_nfc(a), 3);
  const auto gb = unicode::char_ngrams(unicode::lower_nfc(b), 3);
  if (ga.empty() || gb.empty()) return 0.0;
  std::map<std::u32string, int> counts;
  for (const auto& g : ga) ++counts[g];
  std::size_t shared = 0;
  for (const auto& g : gb) {
    auto it = counts.find(g);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++shared;
    }
  }
  return 2.0 * static_cast<double>(shared) / static_cast<double>(ga.size() + gb.size());
}

// Scores each candidate independently against the mention surface.
inline std::vector<double> score_lexical(const RankInput& input) {
  if (input.mode != RankMode::kCl) {
    throw UsageError("the lexical scorer only supports CL rank inputs");
  }
  std::vector<double> scores;
  scores.reserve(input.candidate_names.size());
  for (const auto& name : input.candidate_names) scores.push_back(trigram_dice(input.surface, name));
  return scores;
}

// Stable descending sort by score; equal scores keep retrieval order.
inline RankedCandidates rerank(const CandidateList& candidates, std::span<const double> scores) {
  if (scores.size() != candidates.candidates.size()) {
    throw ValidationError("mention " + candidates.mention_id + ": " + std::to_string(scores.size()) +
                          " scores for " + std::to_string(candidates.candidates.size()) + " candidates");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError("mention " + candidates.mention_id + ": NaN score");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RankedCandidates out{candidates.mention_id, {}, {}};
  out.order.reserve(idx.size());
  out.scores.reserve(idx.size());
  for (std::size_t i : idx) {
    out.order.push_back(candidates.candidates[i].cui);
    out.scores.push_back(scores[i]);
  }
  return out;
}

enum class ScorerKind { kLexicalBaseline, kExternal };

struct ScorerSpec {
  ScorerKind kind = ScorerKind::kLexicalBaseline;
  RankMode mode = RankMode::kCl;
  std::string endpoint;  // required for kExternal

  void validate() const {
    if (kind == ScorerKind::kExternal && endpoint.empty()) {
      throw UsageError("external scorer requires an endpoint");
    }
    if (kind == ScorerKind::kLexicalBaseline && mode != RankMode::kCl) {
      throw UsageError("the lexical scorer only supports CL mode");
    }
  }
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  // One score vector per input, aligned with its candidate list.
  virtual std::vector<std::vector<double>> score(std::span<const RankInput> inputs) = 0;
};

class LexicalScorer final : public Scorer {
 public:
  explicit LexicalScorer(std::size_t threads = 0) : threads_(threads) {}
  std::vector<std::vector<double>> score(std::span<const RankInput> inputs) override {
    std::vector<std::vector<double>> out(inputs.size());
    parallel_for(inputs.size(), threads_, [&](std::size_t i) { out[i] = score_lexical(inputs[i]); });
    return out;
  }

 private:
  std::size_t threads_;
};

// Builds rank inputs for every mention with a non-empty candidate list,
// scores them, and reranks. Output is in corpus mention order.
inline std::vector<RankedCandidates> rank_corpus(const CorpusSplit& split,
                                                 const std::vector<CandidateList>& lists,
                                                 const KnowledgeBase& kb, Scorer& scorer,
                                                 RankMode mode, const MarkOptions& marking = {},
                                                 std::size_t threads = 0) {
  std::unordered_map<std::string_view, const CandidateList*> by_mention;
  for (const auto& l : lists) by_mention.emplace(l.mention_id, &l);
  struct Job {
    const Document* doc;
    const LinkedMention* mention;
    const CandidateList* list;
  };
  std::vector<Job> jobs;
  std::vector<RankedCandidates> out;
  for (const auto& doc : split.documents) {
    for (const auto& m : doc.mentions) {
      auto it = by_mention.find(m.mention_id);
      if (it == by_mention.end()) throw ValidationError("mention " + m.mention_id + " has no candidate list");
      jobs.push_back({&doc, &m, it->second});
    }
  }
  std::vector<RankInput> inputs(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    if (jobs[i].list->candidates.empty()) return;
    inputs[i] = build_rank_input(*jobs[i].mention, *jobs[i].doc, *jobs[i].list, kb, mode, marking);
  });
  std::vector<RankInput> to_score;
  std::vector<std::size_t> slot;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!jobs[i].list->candidates.empty()) {
      slot.push_back(i);
      to_score.push_back(std::move(inputs[i]));
    }
  }
  const auto scores = scorer.score(to_score);
  if (scores.size() != to_score.size()) throw RuntimeFailure("scorer returned the wrong number of score vectors");
  out.resize(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) out[i].mention_id = jobs[i].mention->mention_id;
  for (std::size_t s = 0; s < slot.size(); ++s) out[slot[s]] = rerank(*jobs[slot[s]].list, scores[s]);
  return out;
}

}  // namespace nnel
