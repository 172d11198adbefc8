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

// The concept knowledge base: one Concept per CUI, one entry per name row.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "nnel/corpus.hpp"
#include "nnel/error.hpp"
#include "nnel/io.hpp"
#include "nnel/log.hpp"
#include "nnel/unicode.hpp"

namespace nnel {

using EntryId = std::uint32_t;

struct ConceptName {
  std::string name;
  Language language = Language::kEn;
};

struct Concept {
  std::string cui;
  std::vector<ConceptName> names;
  EntityType semantic_type = EntityType::kDiso;
};

struct KbEntry {
  EntryId entry_id = 0;
  std::size_t concept_index = 0;
  std::string name;
  Language language = Language::kEn;
};

class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  // Appends a name row. A new CUI creates a concept; a known CUI must keep
  // its semantic type. Returns false for an exact duplicate row.
  bool add(std::string_view cui, std::string_view name, Language lang, EntityType type) {
    if (cui.empty()) throw ValidationError("empty CUI");
    if (name.empty()) throw ValidationError("empty name for CUI " + std::string(cui));
    std::string normalized = unicode::nfc_utf8(name);
    auto [it, inserted] = by_cui_.try_emplace(std::string(cui), concepts_.size());
    if (inserted) {
      concepts_.push_back(Concept{std::string(cui), {}, type});
    } else if (concepts_[it->second].semantic_type != type) {
      throw ValidationError("CUI " + std::string(cui) + " listed with conflicting types " +
                            std::string(to_string(concepts_[it->second].semantic_type)) + " and " +
                            std::string(to_string(type)));
    }
    Concept& c = concepts_[it->second];
    for (const auto& n : c.names) {
      if (n.name == normalized && n.language == lang) return false;
    }
    c.names.push_back({normalized, lang});
    entries_.push_back(KbEntry{static_cast<EntryId>(entries_.size()), it->second,
                               std::move(normalized), lang});
    return true;
  }

  const std::vector<Concept>& concepts() const { return concepts_; }
  const std::vector<KbEntry>& entries() const { return entries_; }
  std::size_t entry_count() const { return entries_.size(); }

  const Concept& concept_of(EntryId id) const { return concepts_.at(entries_.at(id).concept_index); }
  const std::string& cui_of(EntryId id) const { return concept_of(id).cui; }

  const Concept* find(std::string_view cui) const {
    auto it = by_cui_.find(std::string(cui));
    return it == by_cui_.end() ? nullptr : &concepts_[it->second];
  }

 private:
  std::vector<Concept> concepts_;
  std::vector<KbEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_cui_;
};

struct IngestStats {
  std::size_t rows = 0;
  std::size_t duplicates = 0;
};

// Dictionary TSV: `cui<TAB>name<TAB>lang<TAB>type`, entry order = row order.
// Blank lines and lines starting with '#' are skipped.
inline KnowledgeBase ingest_dictionary_text(std::string_view data, IngestStats* stats = nullptr) {
  KnowledgeBase kb;
  IngestStats local;
  const auto lines = io::split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty() || lines[i][0] == '#') continue;
    const auto where = "dictionary line " + std::to_string(i + 1) + ": ";
    const auto cols = io::split(lines[i], '\t');
    if (cols.size() != 4) throw ValidationError(where + "expected 4 tab-separated columns");
    try {
      const auto type = entity_type_from_tag(cols[3]);
      if (!type) throw ValidationError("unknown entity type '" + cols[3] + "'");
      ++local.rows;
      if (!kb.add(cols[0], cols[1], parse_language(cols[2]), *type)) ++local.duplicates;
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  if (kb.entry_count() == 0) throw ValidationError("empty knowledge base");
  if (local.duplicates > 0) {
    log::warn("dictionary: dropped ", local.duplicates, " duplicate (cui, name, lang) rows");
  }
  if (stats) *stats = local;
  return kb;
}

inline KnowledgeBase ingest_dictionary(const std::filesystem::path& path,
                                       IngestStats* stats = nullptr) {
  return ingest_dictionary_text(io::read_file(path), stats);
}

}  // namespace nnel
