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

#include "nnel/eval.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <random>

#include "nnel/pipeline.hpp"
#include "support/oracles.hpp"

namespace nnel {
namespace {

// Ranked lists that put the gold CUI at the given 1-based positions
// (0 = absent) in a list of 10.
struct Positions {
  std::vector<RankedCandidates> ranked;
  GoldMap gold;
};

Positions at_positions(const std::vector<std::size_t>& positions) {
  Positions p;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const std::string id = "m" + std::to_string(i);
    RankedCandidates r{id, {}, {}};
    for (std::size_t j = 1; j <= 10; ++j) {
      r.order.push_back(j == positions[i] ? "GOLD" : "X" + std::to_string(j));
      r.scores.push_back(1.0 / static_cast<double>(j));
    }
    p.ranked.push_back(r);
    p.gold[id] = "GOLD";
  }
  return p;
}

TEST(Accuracy, SingleMentionAtThree) {
  const auto p = at_positions({3});
  const auto r = accuracy_at_k(p.ranked, p.gold);
  EXPECT_EQ(r.acc.at(1), 0.0);
  EXPECT_EQ(r.acc.at(5), 1.0);
  EXPECT_EQ(r.acc.at(10), 1.0);
}

TEST(Accuracy, AllCorrect) {
  const auto p = at_positions({1, 1, 1, 1});
  const auto r = accuracy_at_k(p.ranked, p.gold);
  for (int k : {1, 5, 10}) EXPECT_EQ(r.acc.at(k), 1.0);
}

TEST(Accuracy, PositionListFixture) {
  // Position 11 is outside a 10-long list, i.e. a miss at every k here.
  const auto p = at_positions({1, 1, 2, 3, 6, 11, 1, 4, 5, 1});
  const auto r = accuracy_at_k(p.ranked, p.gold);
  EXPECT_EQ(r.n, 10u);
  EXPECT_EQ(r.acc.at(1), 0.4);
  EXPECT_EQ(r.acc.at(5), 0.8);
  EXPECT_EQ(r.acc.at(10), 0.9);
}

TEST(Accuracy, ZeroMentionsIsAnError) {
  EXPECT_THROW(accuracy_at_k({}, {}), ValidationError);
}

TEST(Accuracy, MissingGoldIsAnError) {
  auto p = at_positions({1});
  p.gold.clear();
  EXPECT_THROW(accuracy_at_k(p.ranked, p.gold), ValidationError);
}

// Properties: monotone in k, bounded, and invariant to mention order.
TEST(Accuracy, MonotoneAndOrderFree) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> pos(1 + rng() % 40);
    for (auto& x : pos) x = rng() % 12;
    auto p = at_positions(pos);
    const auto a = accuracy_at_k(p.ranked, p.gold, {1, 2, 3, 5, 7, 10});
    EXPECT_TRUE(a.monotone());
    std::shuffle(p.ranked.begin(), p.ranked.end(), rng);
    EXPECT_EQ(accuracy_at_k(p.ranked, p.gold, {1, 2, 3, 5, 7, 10}).acc, a.acc);
  }
}

TEST(Accuracy, PerTypeBreakdown) {
  const auto p = at_positions({1, 2, 1});
  const std::unordered_map<std::string, std::string> types = {{"m0", "DISO"}, {"m1", "DISO"}, {"m2", "CHEM"}};
  const auto r = accuracy_at_k(p.ranked, p.gold, kDefaultKs, Track::kBi, &types);
  EXPECT_EQ(r.per_type.at("DISO").acc.at(1), 0.5);
  EXPECT_EQ(r.per_type.at("CHEM").acc.at(1), 1.0);
}

// --- rank invariance -------------------------------------------------------------

struct Retrieved {
  CorpusSplit split = parse_jsonl_corpus(testing::source_path("samples/dev.jsonl"));
  KnowledgeBase kb = ingest_dictionary(testing::source_path("samples/dictionary.tsv"));
  std::vector<CandidateList> lists;
  Retrieved() {
    const auto m = hash_embed_dictionary(kb, 128);
    HashEmbeddingProvider p(128);
    lists = retrieve_corpus(split, kb, m, p, {}).lists;
  }
};

TEST(Invariance, RerankingPasses) {
  Retrieved f;
  std::mt19937_64 rng(31);
  std::vector<RankedCandidates> ranked;
  for (const auto& l : f.lists) {
    std::vector<double> s(l.candidates.size());
    for (auto& x : s) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    ranked.push_back(rerank(l, s));
  }
  const auto rep = rank_invariance_check(f.lists, ranked, gold_map(f.split));
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.checked, f.split.mention_count());
}

TEST(Invariance, DroppedCandidateIsReported) {
  Retrieved f;
  std::vector<RankedCandidates> ranked;
  for (const auto& l : f.lists) ranked.push_back(as_ranked(l));
  ranked[2].order.pop_back();
  ranked[2].scores.pop_back();
  const auto rep = rank_invariance_check(f.lists, ranked, gold_map(f.split));
  EXPECT_FALSE(rep.ok());
  ASSERT_GE(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].mention_id, f.lists[2].mention_id);
}

TEST(Invariance, MissingMentionIsReported) {
  Retrieved f;
  std::vector<RankedCandidates> ranked;
  for (const auto& l : f.lists) ranked.push_back(as_ranked(l));
  ranked.pop_back();
  const auto rep = rank_invariance_check(f.lists, ranked, gold_map(f.split));
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].mention_id, f.lists.back().mention_id);
}

// --- cross-validation ---------------------------------------------------------

CorpusSplit docs_with_mentions(std::size_t n) {
  CorpusSplit s{"cv", {}};
  for (std::size_t d = 0; d < n; ++d) {
    Document doc;
    doc.doc_id = "d" + std::to_string(d);
    doc.text = U"cancer";
    doc.mentions.push_back({"d" + std::to_string(d) + "-m", 0, 6, "cancer", "DISO", std::string("C1")});
    s.documents.push_back(doc);
  }
  return s;
}

std::vector<RankedCandidates> oracle_runner(const CorpusSplit&, const CorpusSplit& heldout) {
  std::vector<RankedCandidates> out;
  for (const auto& d : heldout.documents) {
    for (const auto& m : d.mentions) out.push_back({m.mention_id, {*m.gold_cui}, {1.0}});
  }
  return out;
}

TEST(CrossValidation, PerfectRunnerScoresOne) {
  const auto rep = cross_validate(docs_with_mentions(10), 2, 13, oracle_runner);
  ASSERT_EQ(rep.fold_accs.size(), 2u);
  EXPECT_EQ(rep.fold_accs[0], 1.0);
  EXPECT_EQ(rep.cv_acc(), 1.0);
  EXPECT_EQ(rep.n, 10u);
}

// Mentions whose surfaces are KB names: the lexical scorer ranks gold
// first, so every fold scores 1.0.
TEST(CrossValidation, ExactMatchCorpusScoresOne) {
  const auto dir = std::filesystem::temp_directory_path() / ("nnel_cv_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::vector<std::string> names = {"cancer", "aspirin", "fever", "bronchus", "heart failure", "lung",
                                          "metformin", "kidney"};
  std::string dict, corpus;
  for (std::size_t i = 0; i < names.size(); ++i) {
    dict += "C" + std::to_string(i) + "\t" + names[i] + "\tEN\tDISO\n";
    const nlohmann::json doc = {
        {"doc_id", "d" + std::to_string(i)}, {"text", "history of " + names[i]}, {"language", "EN"},
        {"mentions", {{{"mention_id", "m" + std::to_string(i)}, {"start", 11}, {"end", 11 + names[i].size()},
                       {"entity_type", "DISO"}, {"gold_cui", "C" + std::to_string(i)}}}}};
    corpus += doc.dump() + "\n";
  }
  io::write_file(dir / "dict.tsv", dict);
  io::write_file(dir / "corpus.jsonl", corpus);
  PipelineConfig c;
  c.dictionary = dir / "dict.tsv";
  c.corpus = dir / "corpus.jsonl";
  c.cross_validate = true;
  c.folds = 2;
  const auto first = run_pipeline(c);
  const auto again = run_pipeline(c);
  std::filesystem::remove_all(dir);
  ASSERT_EQ(first.reports.size(), 2u);  // EN and BI
  for (const auto& r : first.reports) {
    EXPECT_EQ(r.cv_acc(), 1.0);
    EXPECT_EQ(r.fold_accs, (std::vector<double>{1.0, 1.0}));
  }
  EXPECT_EQ(report_json(c, first), report_json(c, again));
}

TEST(CrossValidation, FoldsAreBalancedAndSeeded) {
  const auto a = fold_assignment(100, 5, 13);
  std::vector<int> sizes(5, 0);
  for (auto f : a) ++sizes[f];
  EXPECT_EQ(sizes, (std::vector<int>{20, 20, 20, 20, 20}));
  EXPECT_EQ(a, fold_assignment(100, 5, 13));
  EXPECT_NE(a, fold_assignment(100, 5, 14));
}

TEST(CrossValidation, TrainAndHeldOutAreDisjointDocuments) {
  const auto split = docs_with_mentions(23);
  std::set<std::string> seen_heldout;
  cross_validate(split, 4, 7, [&](const CorpusSplit& train, const CorpusSplit& heldout) {
    std::set<std::string> t;
    for (const auto& d : train.documents) t.insert(d.doc_id);
    for (const auto& d : heldout.documents) {
      EXPECT_EQ(t.count(d.doc_id), 0u);
      EXPECT_TRUE(seen_heldout.insert(d.doc_id).second);
    }
    EXPECT_EQ(t.size() + heldout.documents.size(), 23u);
    return oracle_runner(train, heldout);
  });
  EXPECT_EQ(seen_heldout.size(), 23u);
}

TEST(CrossValidation, RejectsDegenerateFolds) {
  EXPECT_THROW(fold_assignment(10, 1, 0), UsageError);
  EXPECT_THROW(fold_assignment(3, 5, 0), ValidationError);
  auto split = docs_with_mentions(4);
  for (auto& d : split.documents) d.mentions.clear();
  EXPECT_THROW(cross_validate(split, 2, 0, oracle_runner), ValidationError);
}

// The shuffle must not depend on the standard library's distributions:
// this pins the result for one seed.
TEST(CrossValidation, AssignmentIsPinned) {
  std::mt19937_64 rng(13);
  std::vector<std::size_t> perm = {0, 1, 2, 3, 4, 5};
  for (std::size_t i = perm.size(); i > 1; --i) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % i;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    std::swap(perm[i - 1], perm[x % i]);
  }
  std::vector<std::size_t> want(6);
  for (std::size_t i = 0; i < 6; ++i) want[perm[i]] = i % 3;
  EXPECT_EQ(fold_assignment(6, 3, 13), want);
}

// --- ablation -------------------------------------------------------------------

EvalReport report(Track t, double acc1, std::size_t n = 100) {
  EvalReport r;
  r.track = t;
  r.n = n;
  r.acc = {{1, acc1}, {5, acc1}, {10, acc1}};
  return r;
}

TEST(Ablation, PublishedPairs) {
  const auto rows = ablation_report({report(Track::kEn, 0.6370), report(Track::kRu, 0.6497), report(Track::kBi, 0.6342)},
                                    {report(Track::kEn, 0.6292), report(Track::kRu, 0.6095), report(Track::kBi, 0.6267)});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(format_gain(rows[0]), "0.0078 (1.24%)");
  EXPECT_EQ(format_gain(rows[1]), "0.0402 (6.60%)");
  EXPECT_EQ(format_gain(rows[2]), "0.0075 (1.20%)");
  EXPECT_NEAR(rows[1].gain, 0.0402, 1e-12);
}

TEST(Ablation, NoDifferenceIsZeroGain) {
  const auto row = ablation_row(report(Track::kEn, 0.5), report(Track::kEn, 0.5));
  EXPECT_EQ(row.gain, 0.0);
  EXPECT_EQ(row.relative_gain, 0.0);
}

TEST(Ablation, ZeroBaselineHasNoRelativeGain) {
  const auto row = ablation_row(report(Track::kEn, 0.5), report(Track::kEn, 0.0));
  EXPECT_FALSE(row.relative_gain);
}

TEST(Ablation, MismatchedRunsAreRejected) {
  EXPECT_THROW(ablation_row(report(Track::kEn, 0.5), report(Track::kRu, 0.5)), ValidationError);
  EXPECT_THROW(ablation_row(report(Track::kEn, 0.5, 10), report(Track::kEn, 0.5, 11)), ValidationError);
}

TEST(Report, JsonShape) {
  auto r = report(Track::kRu, 0.25, 4);
  r.fold_accs = {0.5, 0.0};
  const auto j = to_json(r);
  EXPECT_EQ(j["track"], "RU");
  EXPECT_EQ(j["n"], 4);
  EXPECT_EQ(j["acc"]["1"], 0.25);
  EXPECT_EQ(j["cv_acc"], 0.25);
}

TEST(Tracks, SubsetsByLanguage) {
  const auto split = parse_jsonl_corpus(testing::source_path("samples/dev.jsonl"));
  const auto en = track_subset(split, Track::kEn);
  const auto ru = track_subset(split, Track::kRu);
  EXPECT_EQ(en.mention_count() + ru.mention_count(), split.mention_count());
  EXPECT_EQ(track_subset(split, Track::kBi).mention_count(), split.mention_count());
  for (const auto& d : en.documents) EXPECT_EQ(d.language, Language::kEn);
  EXPECT_EQ(tracks_present(split), (std::vector<Track>{Track::kEn, Track::kRu, Track::kBi}));
}

}  // namespace
}  // namespace nnel
