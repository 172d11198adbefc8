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

// Retrieval output (CandidateList) and rank output (RankedCandidates), plus
// their JSONL interchange formats.

#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnel/error.hpp"
#include "nnel/io.hpp"
#include "nnel/kb.hpp"

namespace nnel {

struct Candidate {
  std::string cui;
  EntryId best_entry_id = 0;  // the synonym that achieved `score`
  double score = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct CandidateList {
  std::string mention_id;
  std::vector<Candidate> candidates;  // scores non-increasing, CUIs distinct
  std::size_t k_requested = 0;

  bool short_list() const { return candidates.size() < k_requested; }
  bool operator==(const CandidateList&) const = default;
};

struct RankedCandidates {
  std::string mention_id;
  std::vector<std::string> order;  // permutation of the candidate CUIs
  std::vector<double> scores;      // aligned with order, non-increasing

  bool operator==(const RankedCandidates&) const = default;
};

// Candidate order taken as-is, scored by retrieval similarity.
inline RankedCandidates as_ranked(const CandidateList& list) {
  RankedCandidates r{list.mention_id, {}, {}};
  for (const auto& c : list.candidates) {
    r.order.push_back(c.cui);
    r.scores.push_back(c.score);
  }
  return r;
}

inline nlohmann::json to_json(const CandidateList& list) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : list.candidates) {
    cands.push_back({{"cui", c.cui}, {"entry_id", c.best_entry_id}, {"score", c.score}});
  }
  return {{"mention_id", list.mention_id}, {"k", list.k_requested}, {"candidates", std::move(cands)}};
}

inline nlohmann::json to_json(const RankedCandidates& r) {
  return {{"mention_id", r.mention_id}, {"order", r.order}, {"scores", r.scores}};
}

namespace detail {

template <class T, class Parse>
std::vector<T> parse_jsonl_records(std::string_view data, std::string_view what, Parse parse) {
  std::vector<T> out;
  const auto lines = io::split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    try {
      out.push_back(parse(nlohmann::json::parse(lines[i])));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string(what) + " line " + std::to_string(i + 1) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(what) + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

template <class T>
std::string dump_jsonl(const std::vector<T>& records) {
  std::ostringstream os;
  for (const auto& r : records) os << to_json(r).dump() << '\n';
  return os.str();
}

}  // namespace detail

inline CandidateList candidate_list_from_json(const nlohmann::json& j) {
  CandidateList list;
  list.mention_id = j.at("mention_id").get<std::string>();
  list.k_requested = j.at("k").get<std::size_t>();
  std::unordered_set<std::string> seen;
  for (const auto& c : j.at("candidates")) {
    Candidate cand{c.at("cui").get<std::string>(), c.at("entry_id").get<EntryId>(),
                   c.at("score").get<double>()};
    if (!seen.insert(cand.cui).second) {
      throw ValidationError("mention " + list.mention_id + ": duplicate candidate CUI " + cand.cui);
    }
    if (!list.candidates.empty() && cand.score > list.candidates.back().score) {
      throw ValidationError("mention " + list.mention_id + ": candidate scores not non-increasing");
    }
    list.candidates.push_back(std::move(cand));
  }
  return list;
}

inline RankedCandidates ranked_from_json(const nlohmann::json& j) {
  RankedCandidates r{j.at("mention_id").get<std::string>(),
                     j.at("order").get<std::vector<std::string>>(),
                     j.at("scores").get<std::vector<double>>()};
  if (r.order.size() != r.scores.size()) {
    throw ValidationError("mention " + r.mention_id + ": order and scores differ in length");
  }
  return r;
}

inline std::vector<CandidateList> parse_candidates_jsonl(std::string_view data) {
  return detail::parse_jsonl_records<CandidateList>(data, "candidates", candidate_list_from_json);
}

inline std::vector<RankedCandidates> parse_ranked_jsonl(std::string_view data) {
  return detail::parse_jsonl_records<RankedCandidates>(data, "ranked", ranked_from_json);
}

inline std::string candidates_to_jsonl(const std::vector<CandidateList>& lists) {
  return detail::dump_jsonl(lists);
}

inline std::string ranked_to_jsonl(const std::vector<RankedCandidates>& ranked) {
  return detail::dump_jsonl(ranked);
}

}  // namespace nnel
