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

// Annotated corpora with (possibly nested) linked mentions: the JSONL
// interchange format, standoff annotation files, the entity-type filter
// used for augmentation corpora, and split merging.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnel/error.hpp"
#include "nnel/io.hpp"
#include "nnel/unicode.hpp"

namespace nnel {

enum class Language { kEn, kRu };

inline std::string_view to_string(Language l) { return l == Language::kEn ? "EN" : "RU"; }

inline Language parse_language(std::string_view code) {
  if (code == "EN" || code == "en") return Language::kEn;
  if (code == "RU" || code == "ru") return Language::kRu;
  throw ValidationError("unknown language code '" + std::string(code) + "'");
}

// The three entity types kept for linking.
enum class EntityType { kDiso, kChem, kAnatomy };

inline constexpr EntityType kAllEntityTypes[] = {EntityType::kDiso, EntityType::kChem,
                                                 EntityType::kAnatomy};

inline std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::kDiso: return "DISO";
    case EntityType::kChem: return "CHEM";
    case EntityType::kAnatomy: return "ANATOMY";
  }
  return "?";
}

inline std::optional<EntityType> entity_type_from_tag(std::string_view tag) {
  if (tag == "DISO") return EntityType::kDiso;
  if (tag == "CHEM") return EntityType::kChem;
  if (tag == "ANATOMY") return EntityType::kAnatomy;
  return std::nullopt;
}

struct LinkedMention {
  std::string mention_id;
  std::size_t start = 0;  // code points, inclusive
  std::size_t end = 0;    // code points, exclusive
  std::string surface;    // NFC UTF-8, equals text[start, end)
  // Source annotation tag. After convert_and_filter it is always one of
  // DISO / CHEM / ANATOMY; freshly parsed corpora may carry others.
  std::string tag;
  std::optional<std::string> gold_cui;

  std::optional<EntityType> entity_type() const { return entity_type_from_tag(tag); }

  // Span containment, including identical spans.
  bool covers(const LinkedMention& other) const {
    return start <= other.start && other.end <= end;
  }
  bool strictly_contains(const LinkedMention& other) const {
    return covers(other) && (start != other.start || end != other.end);
  }
};

struct Document {
  std::string doc_id;
  std::u32string text;  // NFC code points
  Language language = Language::kEn;
  std::vector<LinkedMention> mentions;

  std::string text_utf8() const { return unicode::encode(text); }
};

struct CorpusSplit {
  std::string name;
  std::vector<Document> documents;

  std::size_t mention_count() const {
    std::size_t n = 0;
    for (const auto& d : documents) n += d.mentions.size();
    return n;
  }
};

// Number of outermost mentions that strictly contain at least one other
// mention of the same document.
inline std::size_t count_nesting_chains(const Document& doc) {
  std::size_t chains = 0;
  for (const auto& outer : doc.mentions) {
    const bool is_nested = std::any_of(doc.mentions.begin(), doc.mentions.end(),
        [&](const LinkedMention& m) { return m.strictly_contains(outer); });
    if (is_nested) continue;
    const bool has_inner = std::any_of(doc.mentions.begin(), doc.mentions.end(),
        [&](const LinkedMention& m) { return outer.strictly_contains(m); });
    if (has_inner) ++chains;
  }
  return chains;
}

// Checks one mention against its document text and fills in `surface`.
// When `surface` is already set it must equal the spanned substring.
inline void validate_mention(const Document& doc, LinkedMention& m) {
  if (m.mention_id.empty()) throw ValidationError("mention in " + doc.doc_id + " has empty mention_id");
  if (m.start >= m.end) {
    throw ValidationError("mention " + m.mention_id + ": empty or inverted span [" +
                          std::to_string(m.start) + ", " + std::to_string(m.end) + ")");
  }
  if (m.end > doc.text.size()) {
    throw ValidationError("mention " + m.mention_id + ": span end " + std::to_string(m.end) +
                          " exceeds text length " + std::to_string(doc.text.size()));
  }
  if (m.tag.empty()) throw ValidationError("mention " + m.mention_id + ": empty entity_type");
  if (m.gold_cui && m.gold_cui->empty()) m.gold_cui.reset();
  const std::string spanned = unicode::encode(std::u32string_view(doc.text).substr(m.start, m.end - m.start));
  if (m.surface.empty()) {
    m.surface = spanned;
  } else if (unicode::nfc_utf8(m.surface) != spanned) {
    throw ValidationError("mention " + m.mention_id + ": surface '" + m.surface +
                          "' does not match text '" + spanned + "'");
  }
}

// Enforces split-level uniqueness of doc_id and mention_id.
inline void validate_split(const CorpusSplit& split) {
  std::unordered_set<std::string> docs, mentions;
  for (const auto& d : split.documents) {
    if (!docs.insert(d.doc_id).second) throw ValidationError("duplicate doc_id '" + d.doc_id + "'");
    for (const auto& m : d.mentions) {
      if (!mentions.insert(m.mention_id).second) {
        throw ValidationError("duplicate mention_id '" + m.mention_id + "'");
      }
    }
  }
}

namespace detail {

inline std::size_t json_offset(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ValidationError(std::string("field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline Document document_from_json(const nlohmann::json& j) {
  Document doc;
  doc.doc_id = j.at("doc_id").get<std::string>();
  if (doc.doc_id.empty()) throw ValidationError("empty doc_id");
  doc.text = unicode::decode_nfc(j.at("text").get<std::string>());
  doc.language = parse_language(j.at("language").get<std::string>());
  for (const auto& jm : j.at("mentions")) {
    LinkedMention m;
    m.mention_id = jm.at("mention_id").get<std::string>();
    m.start = json_offset(jm, "start");
    m.end = json_offset(jm, "end");
    m.tag = jm.at("entity_type").get<std::string>();
    if (auto it = jm.find("gold_cui"); it != jm.end() && !it->is_null()) {
      m.gold_cui = it->get<std::string>();
    }
    if (auto it = jm.find("surface"); it != jm.end() && !it->is_null()) {
      m.surface = it->get<std::string>();
    }
    validate_mention(doc, m);
    doc.mentions.push_back(std::move(m));
  }
  return doc;
}

}  // namespace detail

inline nlohmann::json to_json(const Document& doc) {
  nlohmann::json mentions = nlohmann::json::array();
  for (const auto& m : doc.mentions) {
    nlohmann::json jm = {{"mention_id", m.mention_id}, {"start", m.start}, {"end", m.end},
                         {"surface", m.surface}, {"entity_type", m.tag}};
    if (m.gold_cui) jm["gold_cui"] = *m.gold_cui;
    mentions.push_back(std::move(jm));
  }
  return {{"doc_id", doc.doc_id}, {"text", doc.text_utf8()},
          {"language", to_string(doc.language)}, {"mentions", std::move(mentions)}};
}

// Parses JSONL text (one document per line; blank lines ignored). Errors
// carry the 1-based line number.
inline CorpusSplit parse_jsonl_corpus_text(std::string_view data, std::string name) {
  CorpusSplit split{std::move(name), {}};
  const auto lines = io::split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    try {
      split.documents.push_back(detail::document_from_json(nlohmann::json::parse(lines[i])));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("line " + std::to_string(i + 1) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  validate_split(split);
  return split;
}

inline CorpusSplit parse_jsonl_corpus(const std::filesystem::path& path,
                                      std::optional<std::string> name = std::nullopt) {
  return parse_jsonl_corpus_text(io::read_file(path), name.value_or(path.stem().string()));
}

inline void write_jsonl_corpus(const CorpusSplit& split, std::ostream& out) {
  for (const auto& doc : split.documents) out << to_json(doc).dump() << '\n';
}

inline void write_jsonl_corpus(const CorpusSplit& split, const std::filesystem::path& path) {
  std::ostringstream os;
  write_jsonl_corpus(split, os);
  io::write_file(path, os.str());
}

// Standoff annotations: `T<id>\t<TAG> <start> <end>\t<surface>` and
// `N<id>\tReference T<id> <KB>:<CUI>`. Other line kinds (relations, notes,
// attributes) are ignored. Mention ids are `<doc_id>/T<id>` so they stay
// unique when documents are combined into a split.
inline Document parse_standoff_text(std::string_view text, std::string_view ann,
                                    std::string doc_id, Language language) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.text = unicode::decode_nfc(text);
  doc.language = language;

  std::map<std::string, std::size_t> by_tid;
  std::vector<std::pair<std::string, std::string>> norms;  // (tid, cui)
  const auto lines = io::split_lines(ann);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (io::trim(line).empty()) continue;
    const auto where = [&] { return doc.doc_id + ".ann line " + std::to_string(ln + 1) + ": "; };
    const auto cols = io::split(line, '\t');
    if (line[0] == 'T') {
      if (cols.size() < 2) throw ValidationError(where() + "malformed entity line");
      if (cols[1].find(';') != std::string::npos) {
        throw ValidationError(where() + "discontinuous spans are not supported");
      }
      const auto fields = io::split(cols[1], ' ');
      if (fields.size() != 3) throw ValidationError(where() + "expected '<TAG> <start> <end>'");
      LinkedMention m;
      m.mention_id = doc.doc_id + "/" + cols[0];
      m.tag = fields[0];
      try {
        std::size_t used = 0;
        m.start = std::stoul(fields[1], &used);
        if (used != fields[1].size()) throw std::invalid_argument("start");
        m.end = std::stoul(fields[2], &used);
        if (used != fields[2].size()) throw std::invalid_argument("end");
      } catch (const std::logic_error&) {
        throw ValidationError(where() + "non-numeric offset");
      }
      if (cols.size() >= 3) m.surface = cols[2];
      try {
        validate_mention(doc, m);
      } catch (const ValidationError& e) {
        throw ValidationError(where() + e.what());
      }
      if (!by_tid.emplace(cols[0], doc.mentions.size()).second) {
        throw ValidationError(where() + "duplicate annotation id " + cols[0]);
      }
      doc.mentions.push_back(std::move(m));
    } else if (line[0] == 'N') {
      if (cols.size() < 2) throw ValidationError(where() + "malformed normalization line");
      const auto fields = io::split(cols[1], ' ');
      if (fields.size() < 3 || fields[0] != "Reference") {
        throw ValidationError(where() + "expected 'Reference T<id> <KB>:<CUI>'");
      }
      const std::string& ref = fields[2];
      const std::size_t colon = ref.find(':');
      const std::string cui = colon == std::string::npos ? ref : ref.substr(colon + 1);
      if (cui.empty()) throw ValidationError(where() + "empty CUI");
      norms.emplace_back(fields[1], cui);
    }
  }
  for (const auto& [tid, cui] : norms) {
    auto it = by_tid.find(tid);
    if (it == by_tid.end()) {
      throw ValidationError(doc.doc_id + ".ann: normalization references unknown annotation " + tid);
    }
    auto& m = doc.mentions[it->second];
    if (m.gold_cui && *m.gold_cui != cui) {
      throw ValidationError(doc.doc_id + ".ann: conflicting normalizations for " + tid);
    }
    m.gold_cui = cui;
  }
  return doc;
}

inline Document parse_standoff_corpus(const std::filesystem::path& text_path,
                                      const std::filesystem::path& ann_path,
                                      Language language = Language::kEn) {
  return parse_standoff_text(io::read_file(text_path), io::read_file(ann_path),
                             text_path.stem().string(), language);
}

// Every `<stem>.txt` with a sibling `<stem>.ann` in `dir`, sorted by stem.
inline CorpusSplit parse_standoff_directory(const std::filesystem::path& dir, Language language,
                                            std::string name) {
  std::vector<std::filesystem::path> texts;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".txt") texts.push_back(e.path());
  }
  std::sort(texts.begin(), texts.end());
  CorpusSplit split{std::move(name), {}};
  for (const auto& t : texts) {
    auto ann = t;
    ann.replace_extension(".ann");
    if (!std::filesystem::exists(ann)) continue;
    split.documents.push_back(parse_standoff_corpus(t, ann, language));
  }
  validate_split(split);
  return split;
}

// Source tag -> kept type, or nullopt for DROP.
using TypeMap = std::map<std::string, std::optional<EntityType>, std::less<>>;

inline TypeMap parse_type_map_text(std::string_view data) {
  TypeMap map;
  const auto lines = io::split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = io::trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto cols = io::split(line, '\t');
    if (cols.size() != 2) {
      throw ValidationError("type map line " + std::to_string(i + 1) + ": expected two tab-separated columns");
    }
    const std::string source(io::trim(cols[0]));
    const std::string target(io::trim(cols[1]));
    std::optional<EntityType> mapped;
    if (target != "DROP") {
      mapped = entity_type_from_tag(target);
      if (!mapped) {
        throw ValidationError("type map line " + std::to_string(i + 1) + ": unknown target '" +
                              target + "' (expected DISO, CHEM, ANATOMY or DROP)");
      }
    }
    if (!map.emplace(source, mapped).second) {
      throw ValidationError("type map: duplicate source tag '" + source + "'");
    }
  }
  return map;
}

inline TypeMap load_type_map(const std::filesystem::path& path) {
  return parse_type_map_text(io::read_file(path));
}

// Rewrites every mention tag through `type_map`, dropping DROP-mapped ones.
// Tags that already name a kept type map to themselves unless the map says
// otherwise, which makes the conversion idempotent. Documents left without
// mentions are kept.
inline CorpusSplit convert_and_filter(const CorpusSplit& corpus, const TypeMap& type_map) {
  std::set<std::string> missing;
  CorpusSplit out{corpus.name, {}};
  out.documents.reserve(corpus.documents.size());
  for (const auto& doc : corpus.documents) {
    Document converted{doc.doc_id, doc.text, doc.language, {}};
    for (const auto& m : doc.mentions) {
      std::optional<EntityType> target;
      if (auto it = type_map.find(m.tag); it != type_map.end()) {
        target = it->second;
      } else if (auto self = entity_type_from_tag(m.tag)) {
        target = self;
      } else {
        missing.insert(m.tag);
        continue;
      }
      if (!target) continue;
      LinkedMention kept = m;
      kept.tag = std::string(to_string(*target));
      converted.mentions.push_back(std::move(kept));
    }
    out.documents.push_back(std::move(converted));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& t : missing) list += (list.empty() ? "" : ", ") + t;
    throw ValidationError("type map has no entry for source tag(s): " + list);
  }
  return out;
}

// Concatenates splits in order. doc_id or mention_id collisions are errors.
inline CorpusSplit merge_splits(const std::vector<CorpusSplit>& splits, std::string new_name) {
  CorpusSplit out{std::move(new_name), {}};
  std::unordered_set<std::string> docs, mentions;
  for (const auto& s : splits) {
    for (const auto& d : s.documents) {
      if (!docs.insert(d.doc_id).second) {
        throw ValidationError("doc_id collision while merging: '" + d.doc_id + "'");
      }
      for (const auto& m : d.mentions) {
        if (!mentions.insert(m.mention_id).second) {
          throw ValidationError("mention_id collision while merging: '" + m.mention_id + "'");
        }
      }
      out.documents.push_back(d);
    }
  }
  return out;
}

}  // namespace nnel
