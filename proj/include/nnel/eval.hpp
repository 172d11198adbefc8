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

// Acc@k, the rank/retrieval consistency gate, document-level
// cross-validation and the boundary-cue ablation table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnel/candidates.hpp"
#include "nnel/corpus.hpp"
#include "nnel/error.hpp"

namespace nnel {

enum class Track { kEn, kRu, kBi };

inline std::string_view to_string(Track t) {
  switch (t) {
    case Track::kEn: return "EN";
    case Track::kRu: return "RU";
    case Track::kBi: return "BI";
  }
  return "?";
}

inline Track parse_track(std::string_view s) {
  if (s == "EN" || s == "en") return Track::kEn;
  if (s == "RU" || s == "ru") return Track::kRu;
  if (s == "BI" || s == "bi") return Track::kBi;
  throw ValidationError("unknown track '" + std::string(s) + "'");
}

// Mentions of `split` that belong to `track` (BI = all of them).
inline CorpusSplit track_subset(const CorpusSplit& split, Track track) {
  if (track == Track::kBi) return split;
  const Language want = track == Track::kEn ? Language::kEn : Language::kRu;
  CorpusSplit out{split.name, {}};
  for (const auto& d : split.documents) {
    if (d.language == want) out.documents.push_back(d);
  }
  return out;
}

using GoldMap = std::unordered_map<std::string, std::string>;

inline GoldMap gold_map(const CorpusSplit& split) {
  GoldMap gold;
  for (const auto& d : split.documents) {
    for (const auto& m : d.mentions) {
      if (m.gold_cui) gold.emplace(m.mention_id, *m.gold_cui);
    }
  }
  return gold;
}

inline const std::set<int> kDefaultKs = {1, 5, 10};

struct AccuracySummary {
  std::size_t n = 0;
  std::map<int, double> acc;  // k -> Acc@k
};

struct EvalReport {
  Track track = Track::kBi;
  std::size_t n = 0;
  std::map<int, double> acc;
  std::map<std::string, AccuracySummary> per_type;  // optional breakdown
  std::vector<double> fold_accs;                    // optional, CV Acc@1 per fold

  std::optional<double> cv_acc() const {
    if (fold_accs.empty()) return std::nullopt;
    return std::accumulate(fold_accs.begin(), fold_accs.end(), 0.0) /
           static_cast<double>(fold_accs.size());
  }

  bool monotone() const {
    double prev = 0.0;
    for (const auto& [k, a] : acc) {
      if (a < prev || a < 0.0 || a > 1.0) return false;
      prev = a;
    }
    return true;
  }
};

// 1-based position of `gold` in `order`, or 0 when absent.
inline std::size_t gold_rank(const std::vector<std::string>& order, const std::string& gold) {
  auto it = std::find(order.begin(), order.end(), gold);
  return it == order.end() ? 0 : static_cast<std::size_t>(it - order.begin()) + 1;
}

inline AccuracySummary summarize_ranks(const std::vector<std::size_t>& ranks, const std::set<int>& ks) {
  AccuracySummary s;
  s.n = ranks.size();
  for (int k : ks) {
    if (k < 1) throw UsageError("k must be at least 1");
    const auto hits = std::count_if(ranks.begin(), ranks.end(),
                                    [k](std::size_t r) { return r != 0 && r <= static_cast<std::size_t>(k); });
    s.acc[k] = static_cast<double>(hits) / static_cast<double>(ranks.size());
  }
  return s;
}

// Acc@k over `ranked`. A gold CUI missing from the list is a miss at every k.
// `types`, when given, adds a per-entity-type breakdown.
inline EvalReport accuracy_at_k(const std::vector<RankedCandidates>& ranked, const GoldMap& gold,
                                const std::set<int>& ks = kDefaultKs, Track track = Track::kBi,
                                const std::unordered_map<std::string, std::string>* types = nullptr) {
  if (ranked.empty()) throw ValidationError("accuracy is undefined for zero mentions");
  std::vector<std::size_t> ranks;
  std::map<std::string, std::vector<std::size_t>> by_type;
  ranks.reserve(ranked.size());
  for (const auto& r : ranked) {
    auto g = gold.find(r.mention_id);
    if (g == gold.end()) throw ValidationError("mention " + r.mention_id + " has no gold CUI");
    const std::size_t pos = gold_rank(r.order, g->second);
    ranks.push_back(pos);
    if (types) {
      auto t = types->find(r.mention_id);
      if (t != types->end()) by_type[t->second].push_back(pos);
    }
  }
  const AccuracySummary all = summarize_ranks(ranks, ks);
  EvalReport report;
  report.track = track;
  report.n = all.n;
  report.acc = all.acc;
  for (const auto& [type, rs] : by_type) report.per_type[type] = summarize_ranks(rs, ks);
  return report;
}

inline std::unordered_map<std::string, std::string> mention_types(const CorpusSplit& split) {
  std::unordered_map<std::string, std::string> types;
  for (const auto& d : split.documents) {
    for (const auto& m : d.mentions) types.emplace(m.mention_id, m.tag);
  }
  return types;
}

struct InvarianceViolation {
  std::string mention_id;
  std::string reason;
};

struct InvarianceReport {
  std::size_t checked = 0;
  double retrieval_acc_at_l = 0.0;  // Acc@L with L = each mention's list length
  double ranked_acc_at_l = 0.0;
  std::vector<InvarianceViolation> violations;

  bool ok() const { return violations.empty() && retrieval_acc_at_l == ranked_acc_at_l; }
};

// Reranking may only permute candidates. Checks per mention that the CUI
// multiset is unchanged and that the gold CUI is present in both lists or
// in neither, and compares the aggregate Acc@L.
inline InvarianceReport rank_invariance_check(const std::vector<CandidateList>& retrieval,
                                              const std::vector<RankedCandidates>& ranked,
                                              const GoldMap& gold) {
  InvarianceReport rep;
  std::unordered_map<std::string, const RankedCandidates*> by_id;
  for (const auto& r : ranked) {
    if (!by_id.emplace(r.mention_id, &r).second) {
      rep.violations.push_back({r.mention_id, "mention ranked twice"});
    }
  }
  std::size_t hits_retrieval = 0, hits_ranked = 0;
  std::unordered_set<std::string> seen;
  for (const auto& list : retrieval) {
    seen.insert(list.mention_id);
    auto it = by_id.find(list.mention_id);
    if (it == by_id.end()) {
      rep.violations.push_back({list.mention_id, "missing from ranked output"});
      continue;
    }
    ++rep.checked;
    std::vector<std::string> a, b = it->second->order;
    for (const auto& c : list.candidates) a.push_back(c.cui);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) rep.violations.push_back({list.mention_id, "candidate set changed by reranking"});
    if (auto g = gold.find(list.mention_id); g != gold.end()) {
      const bool in_a = std::binary_search(a.begin(), a.end(), g->second);
      const bool in_b = std::find(it->second->order.begin(), it->second->order.end(), g->second) !=
                        it->second->order.end();
      hits_retrieval += in_a;
      hits_ranked += in_b;
      if (in_a != in_b) rep.violations.push_back({list.mention_id, "gold presence differs at full list length"});
    }
  }
  for (const auto& r : ranked) {
    if (!seen.count(r.mention_id)) rep.violations.push_back({r.mention_id, "ranked mention has no retrieval list"});
  }
  if (rep.checked > 0) {
    rep.retrieval_acc_at_l = static_cast<double>(hits_retrieval) / static_cast<double>(rep.checked);
    rep.ranked_acc_at_l = static_cast<double>(hits_ranked) / static_cast<double>(rep.checked);
  }
  return rep;
}

namespace detail {

// Unbiased draw in [0, bound) from mt19937_64 by rejection; unlike
// std::uniform_int_distribution the result is the same on every standard
// library.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

}  // namespace detail

// Fold index for each document: a seeded Fisher-Yates shuffle of the
// document order, then round-robin assignment.
inline std::vector<std::size_t> fold_assignment(std::size_t n_docs, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("cross-validation needs at least 2 folds");
  if (n_docs < folds) {
    throw ValidationError("cannot split " + std::to_string(n_docs) + " documents into " +
                          std::to_string(folds) + " folds; use fewer folds");
  }
  std::vector<std::size_t> perm(n_docs);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n_docs; i > 1; --i) {
    std::swap(perm[i - 1], perm[detail::bounded(rng, i)]);
  }
  std::vector<std::size_t> fold_of(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) fold_of[perm[i]] = i % folds;
  return fold_of;
}

// Runs `runner(train, heldout)` once per fold and scores the held-out
// predictions. Documents, never individual mentions, are the folding unit.
// The returned report pools every held-out prediction for `acc` and lists
// the per-fold Acc@1 in `fold_accs`.
template <class FoldRunner>
EvalReport cross_validate(const CorpusSplit& split, std::size_t folds, std::uint64_t seed,
                          FoldRunner&& runner, Track track = Track::kBi,
                          const std::set<int>& ks = kDefaultKs) {
  const auto fold_of = fold_assignment(split.documents.size(), folds, seed);
  std::vector<RankedCandidates> pooled;
  std::vector<double> fold_accs;
  const GoldMap gold = gold_map(split);
  for (std::size_t f = 0; f < folds; ++f) {
    CorpusSplit train{split.name + "/train" + std::to_string(f), {}};
    CorpusSplit heldout{split.name + "/fold" + std::to_string(f), {}};
    for (std::size_t d = 0; d < split.documents.size(); ++d) {
      (fold_of[d] == f ? heldout : train).documents.push_back(split.documents[d]);
    }
    if (heldout.mention_count() == 0) {
      throw ValidationError("fold " + std::to_string(f) + " has no mentions; use fewer folds");
    }
    std::vector<RankedCandidates> predicted = runner(train, heldout);
    fold_accs.push_back(accuracy_at_k(predicted, gold, {1}, track).acc.at(1));
    for (auto& p : predicted) pooled.push_back(std::move(p));
  }
  EvalReport report = accuracy_at_k(pooled, gold, ks, track);
  report.fold_accs = std::move(fold_accs);
  return report;
}

struct AblationRow {
  Track track = Track::kBi;
  double with_cues = 0.0;
  double without_cues = 0.0;
  double gain = 0.0;                    // with - without
  std::optional<double> relative_gain;  // gain / without, absent when without == 0
};

inline AblationRow ablation_row(const EvalReport& with_cues, const EvalReport& without_cues) {
  if (with_cues.track != without_cues.track || with_cues.n != without_cues.n) {
    throw ValidationError("ablation reports come from different corpora (" +
                          std::string(to_string(with_cues.track)) + "/" + std::to_string(with_cues.n) +
                          " vs " + std::string(to_string(without_cues.track)) + "/" +
                          std::to_string(without_cues.n) + ")");
  }
  AblationRow row;
  row.track = with_cues.track;
  row.with_cues = with_cues.acc.at(1);
  row.without_cues = without_cues.acc.at(1);
  row.gain = row.with_cues - row.without_cues;
  if (row.without_cues != 0.0) row.relative_gain = row.gain / row.without_cues;
  return row;
}

inline std::vector<AblationRow> ablation_report(const std::vector<EvalReport>& with_cues,
                                                const std::vector<EvalReport>& without_cues) {
  if (with_cues.size() != without_cues.size()) throw ValidationError("ablation: track lists differ");
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < with_cues.size(); ++i) rows.push_back(ablation_row(with_cues[i], without_cues[i]));
  return rows;
}

// "0.0078 (1.24%)"
inline std::string format_gain(const AblationRow& row) {
  char buf[64];
  if (row.relative_gain) {
    std::snprintf(buf, sizeof buf, "%.4f (%.2f%%)", row.gain, *row.relative_gain * 100.0);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f (n/a)", row.gain);
  }
  return buf;
}

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-5s %-18s %-18s %s\n", "Lang", "w/ [Ms] and [Me]", "w/o [Ms] and [Me]", "Gain");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-5s %-18s %-18s %s\n", std::string(to_string(r.track)).c_str(),
                  fixed4(r.with_cues).c_str(), fixed4(r.without_cues).c_str(), format_gain(r).c_str());
    os << line;
  }
  return os.str();
}

inline std::string format_report_table(const std::vector<EvalReport>& reports) {
  std::set<int> ks;
  for (const auto& r : reports) {
    for (const auto& [k, a] : r.acc) ks.insert(k);
  }
  std::ostringstream os;
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-6s %7s", "Track", "N");
  os << cell;
  for (int k : ks) {
    std::snprintf(cell, sizeof cell, " %8s", ("Acc@" + std::to_string(k)).c_str());
    os << cell;
  }
  os << "   CV Acc\n";
  for (const auto& r : reports) {
    std::snprintf(cell, sizeof cell, "%-6s %7zu", std::string(to_string(r.track)).c_str(), r.n);
    os << cell;
    for (int k : ks) {
      auto it = r.acc.find(k);
      std::snprintf(cell, sizeof cell, " %8s", it == r.acc.end() ? "-" : fixed4(it->second).c_str());
      os << cell;
    }
    const auto cv = r.cv_acc();
    std::snprintf(cell, sizeof cell, " %8s\n", cv ? fixed4(*cv).c_str() : "-");
    os << cell;
  }
  return os.str();
}

inline nlohmann::json acc_json(const std::map<int, double>& acc) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, a] : acc) j[std::to_string(k)] = a;
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {{"track", to_string(r.track)}, {"n", r.n}, {"acc", acc_json(r.acc)},
                      {"folds", r.fold_accs}};
  if (auto cv = r.cv_acc()) j["cv_acc"] = *cv;
  if (!r.per_type.empty()) {
    nlohmann::json pt = nlohmann::json::object();
    for (const auto& [t, s] : r.per_type) pt[t] = {{"n", s.n}, {"acc", acc_json(s.acc)}};
    j["per_type"] = std::move(pt);
  }
  return j;
}

inline nlohmann::json to_json(const AblationRow& r) {
  nlohmann::json j = {{"track", to_string(r.track)}, {"with_cues", r.with_cues},
                      {"without_cues", r.without_cues}, {"gain", r.gain}};
  j["relative_gain"] = r.relative_gain ? nlohmann::json(*r.relative_gain) : nlohmann::json();
  return j;
}

inline nlohmann::json to_json(const InvarianceReport& r) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : r.violations) v.push_back({{"mention_id", x.mention_id}, {"reason", x.reason}});
  return {{"checked", r.checked}, {"retrieval_acc_at_l", r.retrieval_acc_at_l},
          {"ranked_acc_at_l", r.ranked_acc_at_l}, {"violations", std::move(v)}, {"ok", r.ok()}};
}

}  // namespace nnel
