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

// Boundary-cue marking of a single mention inside a character window of its
// document, and the two rank-input constructions built on top of it:
//
//   LISTWISE  "<context> [SEP] [ST0] <name0> [ST1] <name1> ..."   (1 sequence)
//   CL        "<context> [SEP] <name_j>"                           (k sequences)

#include <algorithm>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnel/candidates.hpp"
#include "nnel/corpus.hpp"
#include "nnel/error.hpp"
#include "nnel/kb.hpp"
#include "nnel/unicode.hpp"

namespace nnel {

inline constexpr std::string_view kMentionStartCue = "[Ms]";
inline constexpr std::string_view kMentionEndCue = "[Me]";
inline constexpr std::string_view kSeparator = "[SEP]";
inline constexpr std::size_t kDefaultWindow = 128;

inline std::string listwise_marker(std::size_t i) { return "[ST" + std::to_string(i) + "]"; }

enum class RankMode { kListwise, kCl };

inline std::string_view to_string(RankMode m) { return m == RankMode::kListwise ? "LISTWISE" : "CL"; }

inline RankMode parse_rank_mode(std::string_view s) {
  if (s == "LISTWISE" || s == "listwise") return RankMode::kListwise;
  if (s == "CL" || s == "cl") return RankMode::kCl;
  throw UsageError("unknown rank mode '" + std::string(s) + "' (expected LISTWISE or CL)");
}

struct MarkOptions {
  std::size_t window = kDefaultWindow;  // code points on each side
  bool cues = true;                     // false = ablation, plain window
};

struct MarkedContext {
  std::string text;
  std::string mention_id;
  std::size_t left_chars = 0;   // context actually taken before the mention
  std::size_t right_chars = 0;  // and after it
  bool cued = true;
};

// Wraps only `mention` (never its nested parents or children) with cues.
// The window is cut at exact code-point counts and clipped at the document
// edges.
inline MarkedContext mark(const LinkedMention& mention, const Document& doc,
                          const MarkOptions& opts = {}) {
  const std::u32string_view text(doc.text);
  const std::size_t lo = mention.start - std::min(mention.start, opts.window);
  const std::size_t hi = std::min(text.size(), mention.end + opts.window);
  MarkedContext out;
  out.mention_id = mention.mention_id;
  out.left_chars = mention.start - lo;
  out.right_chars = hi - mention.end;
  out.cued = opts.cues;
  out.text = unicode::encode(text.substr(lo, mention.start - lo));
  if (opts.cues) out.text.append(kMentionStartCue).push_back(' ');
  out.text += unicode::encode(text.substr(mention.start, mention.end - mention.start));
  if (opts.cues) out.text.append(" ").append(kMentionEndCue);
  out.text += unicode::encode(text.substr(mention.end, hi - mention.end));
  return out;
}

// Removes the first "[Ms] " and the first " [Me]" after it.
inline std::string strip_cues(std::string_view marked) {
  std::string s(marked);
  const std::string open = std::string(kMentionStartCue) + " ";
  const std::string close = " " + std::string(kMentionEndCue);
  const auto a = s.find(open);
  if (a == std::string::npos) return s;
  s.erase(a, open.size());
  const auto b = s.find(close, a);
  if (b != std::string::npos) s.erase(b, close.size());
  return s;
}

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

struct RankInput {
  RankMode mode = RankMode::kCl;
  std::string mention_id;
  std::string surface;
  std::vector<std::string> sequences;
  std::vector<std::string> candidate_cuis;
  std::vector<std::string> candidate_names;
};

// Candidate names are the retrieval-winning synonyms (best_entry_id).
inline RankInput build_rank_input(const LinkedMention& mention, const Document& doc,
                                  const CandidateList& candidates, const KnowledgeBase& kb,
                                  RankMode mode, const MarkOptions& opts = {}) {
  if (candidates.candidates.empty()) {
    throw ValidationError("mention " + mention.mention_id + ": no candidates to rank");
  }
  RankInput in;
  in.mode = mode;
  in.mention_id = mention.mention_id;
  in.surface = mention.surface;
  for (const auto& c : candidates.candidates) {
    if (c.best_entry_id >= kb.entry_count() || kb.cui_of(c.best_entry_id) != c.cui) {
      throw ValidationError("mention " + mention.mention_id + ": candidate " + c.cui +
                            " / entry " + std::to_string(c.best_entry_id) + " not in knowledge base");
    }
    in.candidate_cuis.push_back(c.cui);
    in.candidate_names.push_back(kb.entries()[c.best_entry_id].name);
  }
  const std::string context = mark(mention, doc, opts).text + " " + std::string(kSeparator);
  if (mode == RankMode::kListwise) {
    std::string seq = context;
    for (std::size_t i = 0; i < in.candidate_names.size(); ++i) {
      seq += " " + listwise_marker(i) + " " + in.candidate_names[i];
    }
    in.sequences.push_back(std::move(seq));
  } else {
    for (const auto& name : in.candidate_names) in.sequences.push_back(context + " " + name);
  }
  return in;
}

inline nlohmann::json to_json(const RankInput& in) {
  return {{"mention_id", in.mention_id}, {"mode", to_string(in.mode)},
          {"sequences", in.sequences}, {"candidate_cuis", in.candidate_cuis}};
}

struct TrainingPair {
  std::string mention_id;
  std::string sequence;
  int label = 0;
  std::string cui;
};

inline nlohmann::json to_json(const TrainingPair& p) {
  return {{"mention_id", p.mention_id}, {"sequence", p.sequence}, {"label", p.label}, {"cui", p.cui}};
}

struct TrainingPairs {
  std::vector<TrainingPair> pairs;
  std::size_t gold_missed = 0;  // mentions whose gold CUI was not retrieved
};

// One pair per (mention, candidate), labelled 1 iff the candidate is the
// gold CUI. In LISTWISE mode every pair of a mention carries the same
// listwise sequence, so the target index is recoverable by grouping on
// mention_id. Output order: corpus mention order, then candidate order.
inline TrainingPairs emit_training_pairs(const CorpusSplit& split,
                                         const std::vector<CandidateList>& candidate_lists,
                                         const KnowledgeBase& kb, RankMode mode,
                                         const MarkOptions& opts = {}) {
  std::unordered_map<std::string_view, const CandidateList*> by_mention;
  for (const auto& c : candidate_lists) by_mention.emplace(c.mention_id, &c);
  TrainingPairs out;
  for (const auto& doc : split.documents) {
    for (const auto& m : doc.mentions) {
      if (!m.gold_cui) throw ValidationError("mention " + m.mention_id + " has no gold_cui");
      auto it = by_mention.find(m.mention_id);
      if (it == by_mention.end()) {
        throw ValidationError("mention " + m.mention_id + " has no candidate list");
      }
      const CandidateList& list = *it->second;
      if (list.candidates.empty()) {
        ++out.gold_missed;
        continue;
      }
      const RankInput in = build_rank_input(m, doc, list, kb, mode, opts);
      bool hit = false;
      for (std::size_t j = 0; j < in.candidate_cuis.size(); ++j) {
        const int label = in.candidate_cuis[j] == *m.gold_cui ? 1 : 0;
        hit = hit || label == 1;
        out.pairs.push_back({m.mention_id,
                             mode == RankMode::kCl ? in.sequences[j] : in.sequences.front(),
                             label, in.candidate_cuis[j]});
      }
      if (!hit) ++out.gold_missed;
    }
  }
  return out;
}

}  // namespace nnel
