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

#include "nnel/kb.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "nnel/embeddings.hpp"
#include "nnel/hash_embed.hpp"
#include "support/oracles.hpp"

namespace nnel {
namespace {

TEST(Kb, SynonymsShareAConcept) {
  const auto kb = ingest_dictionary_text("C0006826\tcancer\tEN\tDISO\nC0006826\tрак\tRU\tDISO\n");
  ASSERT_EQ(kb.concepts().size(), 1u);
  EXPECT_EQ(kb.entry_count(), 2u);
  EXPECT_EQ(kb.concepts()[0].names.size(), 2u);
  EXPECT_EQ(kb.cui_of(1), "C0006826");
}

TEST(Kb, EmptyDictionaryIsRejected) {
  try {
    ingest_dictionary_text("# only a comment\n\n");
    FAIL() << "expected a ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("empty knowledge base"), std::string::npos);
  }
}

TEST(Kb, CountsConceptsAndEntries) {
  std::string tsv;
  for (int i = 0; i < 1000; ++i) {
    tsv += "C" + std::to_string(i % 400) + "\tname " + std::to_string(i) + "\tEN\tDISO\n";
  }
  const auto kb = ingest_dictionary_text(tsv);
  EXPECT_EQ(kb.concepts().size(), 400u);
  EXPECT_EQ(kb.entry_count(), 1000u);
  for (std::size_t e = 0; e < kb.entry_count(); ++e) EXPECT_EQ(kb.entries()[e].entry_id, e);
}

// Property: entry -> concept is total and onto, and each concept's names
// are exactly its entries.
TEST(Kb, EntryToConceptIsTotalAndOnto) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rk = testing::random_kb(rng, 1 + rng() % 300, 1 + rng() % 50, 8);
    const auto& kb = rk.kb;
    std::vector<std::size_t> per_concept(kb.concepts().size(), 0);
    for (const auto& e : kb.entries()) {
      ASSERT_LT(e.concept_index, kb.concepts().size());
      ++per_concept[e.concept_index];
      EXPECT_EQ(kb.find(kb.cui_of(e.entry_id)), &kb.concepts()[e.concept_index]);
    }
    for (std::size_t c = 0; c < per_concept.size(); ++c) {
      EXPECT_GT(per_concept[c], 0u);
      EXPECT_EQ(per_concept[c], kb.concepts()[c].names.size());
    }
  }
}

TEST(Kb, DuplicateRowsAreDropped) {
  IngestStats stats;
  const auto kb = ingest_dictionary_text("C1\tx\tEN\tDISO\nC1\tx\tEN\tDISO\nC1\tx\tRU\tDISO\n", &stats);
  EXPECT_EQ(kb.entry_count(), 2u);
  EXPECT_EQ(stats.rows, 3u);
  EXPECT_EQ(stats.duplicates, 1u);
}

TEST(Kb, MalformedRowsAreRejected) {
  EXPECT_THROW(ingest_dictionary_text("C1\tx\tEN\n"), ValidationError);
  EXPECT_THROW(ingest_dictionary_text("C1\tx\tDE\tDISO\n"), ValidationError);
  EXPECT_THROW(ingest_dictionary_text("C1\tx\tEN\tPROC\n"), ValidationError);
  EXPECT_THROW(ingest_dictionary_text("C1\t\tEN\tDISO\n"), ValidationError);
  EXPECT_THROW(ingest_dictionary_text("C1\tx\tEN\tDISO\nC1\ty\tEN\tCHEM\n"), ValidationError);
}

// --- EMB1 and attachment ------------------------------------------------------

KnowledgeBase three_entry_kb() {
  return ingest_dictionary_text("C1\ta\tEN\tDISO\nC2\tb\tEN\tDISO\nC3\tc\tEN\tCHEM\n");
}

EmbeddingMatrix matrix_of(std::uint32_t dim, std::vector<float> values, std::vector<std::string> ids) {
  return EmbeddingMatrix{dim, std::move(values), std::move(ids)};
}

TEST(Attach, UnitRowsNeedNoRenormalization) {
  const auto r = attach_embeddings(three_entry_kb(),
                                   matrix_of(2, {1, 0, 0, 1, 0.6f, 0.8f}, {"0", "1", "2"}));
  EXPECT_EQ(r.renormalized, 0u);
  EXPECT_EQ(r.matrix.rows(), 3u);
}

TEST(Attach, RenormalizesOffUnitRows) {
  const auto kb = ingest_dictionary_text("C1\ta\tEN\tDISO\n");
  const auto r = attach_embeddings(kb, matrix_of(4, {3, 4, 0, 0}, {"0"}));
  EXPECT_EQ(r.renormalized, 1u);
  EXPECT_NEAR(r.matrix.values[0], 0.6, 1e-6);
  EXPECT_NEAR(r.matrix.values[1], 0.8, 1e-6);
  EXPECT_EQ(r.matrix.values[2], 0.0f);
}

TEST(Attach, RowCountMismatchIsRejected) {
  EXPECT_THROW(attach_embeddings(three_entry_kb(), matrix_of(2, {1, 0, 0, 1}, {"0", "1"})), ValidationError);
}

TEST(Attach, NonFiniteValuesAreRejected) {
  EXPECT_THROW(attach_embeddings(three_entry_kb(), matrix_of(2, {1, 0, NAN, 1, 0, 1}, {"0", "1", "2"})),
               ValidationError);
  EXPECT_THROW(attach_embeddings(three_entry_kb(), matrix_of(2, {1, 0, INFINITY, 1, 0, 1}, {"0", "1", "2"})),
               ValidationError);
  EXPECT_THROW(attach_embeddings(three_entry_kb(), matrix_of(2, {1, 0, 0, 0, 0, 1}, {"0", "1", "2"})),
               ValidationError);
}

TEST(Attach, BadRowIdsAreRejected) {
  EXPECT_THROW(attach_embeddings(three_entry_kb(), matrix_of(2, {1, 0, 0, 1, 0, 1}, {"0", "0", "2"})),
               ValidationError);
  EXPECT_THROW(attach_embeddings(three_entry_kb(), matrix_of(2, {1, 0, 0, 1, 0, 1}, {"0", "x", "2"})),
               ValidationError);
  EXPECT_THROW(attach_embeddings(three_entry_kb(), matrix_of(2, {1, 0, 0, 1, 0, 1}, {"0", "1", "7"})),
               ValidationError);
}

TEST(Attach, RowsAreReorderedById) {
  const auto r = attach_embeddings(three_entry_kb(), matrix_of(2, {0, 1, 1, 0, 0.6f, 0.8f}, {"1", "0", "2"}));
  EXPECT_EQ(r.matrix.row(0)[0], 1.0f);
  EXPECT_EQ(r.matrix.row(1)[1], 1.0f);
  EXPECT_EQ(r.matrix.row_ids[0], "0");
}

TEST(Emb1, RoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  EmbeddingMatrix m;
  m.dim = 17;
  for (int r = 0; r < 40; ++r) {
    const auto v = testing::random_unit(rng, m.dim);
    m.values.insert(m.values.end(), v.begin(), v.end());
    m.row_ids.push_back("row-" + std::to_string(r) + (r % 3 ? "" : "-рак"));
  }
  m.values[3] = -0.0f;
  const auto back = decode_emb1(encode_emb1(m));
  EXPECT_EQ(back.dim, m.dim);
  EXPECT_EQ(back.row_ids, m.row_ids);
  ASSERT_EQ(back.values.size(), m.values.size());
  EXPECT_EQ(std::memcmp(back.values.data(), m.values.data(), m.values.size() * sizeof(float)), 0);
}

TEST(Emb1, HeaderLayoutIsLittleEndian) {
  const auto bytes = encode_emb1(matrix_of(2, {1.0f, 0.0f}, {"0"}));
  ASSERT_GE(bytes.size(), kEmbHeaderBytes);
  EXPECT_EQ(bytes.substr(0, 4), "EMB1");
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[8], 1);  // rows
  EXPECT_EQ(bytes[16], 2); // dim
  // 1.0f = 0x3f800000, stored low byte first.
  EXPECT_EQ(static_cast<unsigned char>(bytes[kEmbHeaderBytes + 3]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[kEmbHeaderBytes + 2]), 0x80);
}

TEST(Emb1, FileSizeFollowsLayout) {
  constexpr std::size_t rows = 10000, dim = 768;
  EmbeddingMatrix m;
  m.dim = dim;
  m.values.assign(rows * dim, 0.0f);
  std::size_t id_bytes = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    m.values[r * dim] = 1.0f;
    m.row_ids.push_back(std::to_string(r));
    id_bytes += 4 + m.row_ids.back().size();
  }
  const auto path = std::filesystem::temp_directory_path() / "nnel_emb1_size.emb";
  write_embeddings(m, path);
  // 24-byte header, f32 payload, then (u32 length + bytes) per row id.
  EXPECT_EQ(std::filesystem::file_size(path), 24 + rows * dim * 4 + id_bytes);
  std::filesystem::remove(path);
}

TEST(Emb1, CorruptInputIsRejected) {
  const auto good = encode_emb1(matrix_of(2, {1.0f, 0.0f}, {"0"}));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_emb1(bad_magic), ValidationError);
  std::string bad_version = good;
  bad_version[4] = 2;
  EXPECT_THROW(decode_emb1(bad_version), ValidationError);
  EXPECT_THROW(decode_emb1(good.substr(0, good.size() - 1)), ValidationError);
  EXPECT_THROW(decode_emb1(good + "x"), ValidationError);
  EXPECT_THROW(decode_emb1(good.substr(0, 10)), ValidationError);
}

TEST(Emb1, EmptyMatrixIsRejected) {
  EXPECT_THROW(encode_emb1(EmbeddingMatrix{4, {}, {}}), ValidationError);
}

// --- hash embedder ------------------------------------------------------------

double cosine(const std::vector<float>& a, const std::vector<float>& b) { return dot(a, b); }

TEST(HashEmbed, IsDeterministicAndUnitNorm) {
  const auto a = hash_embed("central cancer", 256);
  const auto b = hash_embed("central cancer", 256);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(l2_norm(a), 1.0, 1e-6);
}

TEST(HashEmbed, SharedGramsMeanHigherSimilarity) {
  const auto cancer = hash_embed("cancer", 256);
  EXPECT_GT(cosine(cancer, hash_embed("cancers", 256)), cosine(cancer, hash_embed("aspirin", 256)));
}

TEST(HashEmbed, CaseAndCompositionInsensitive) {
  EXPECT_EQ(hash_embed("CANCER", 64), hash_embed("cancer", 64));
  EXPECT_EQ(hash_embed("caf\x65\xcc\x81", 64), hash_embed("caf\xc3\xa9", 64));
}

TEST(HashEmbed, RejectsBadInput) {
  EXPECT_THROW(hash_embed("", 64), ValidationError);
  EXPECT_THROW(hash_embed("cancer", kHashEmbedMinDim - 1), ValidationError);
}

// Pins the hash function so vectors stay comparable across builds. The
// expected value is FNV-1a 64 of "abc" (0xe71fa2190541574b, a published
// test vector), xor the seed, then splitmix64 (increment and finalizer), computed
// step by step here.
TEST(HashEmbed, GramHashIsPinned) {
  std::uint64_t x = (0xe71fa2190541574bull ^ 0x6e6e656c5f763031ull) + 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  x = x ^ (x >> 31);
  EXPECT_EQ(hash_gram(U"abc"), x);
}

TEST(HashEmbed, DictionaryRowsMatchSingleEmbeds) {
  const auto kb = ingest_dictionary_text("C1\tcancer\tEN\tDISO\nC2\tрак лёгкого\tRU\tDISO\n");
  for (std::size_t threads : {1u, 4u}) {
    const auto m = hash_embed_dictionary(kb, 32, threads);
    ASSERT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.row_ids[1], "1");
    const auto row = m.row(1);
    EXPECT_EQ(std::vector<float>(row.begin(), row.end()), hash_embed("рак лёгкого", 32));
  }
}

}  // namespace
}  // namespace nnel
