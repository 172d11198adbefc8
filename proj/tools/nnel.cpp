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

// nnel: command-line front end for the entity-linking pipeline.
//
//   nnel ingest | embed | retrieve | rank | train-pairs | eval | ablate |
//        augment | pipeline
//
// Every subcommand accepts --config FILE (flat key=value lines, keys are
// long flag names). Explicit flags win over the config file, which wins
// over built-in defaults. Exit codes: 0 ok, 1 usage, 2 validation,
// 3 runtime.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nnel/nnel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sha256_file(const fs::path& path) {
  const std::string data = nnel::io::read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw nnel::RuntimeFailure("sha256 failed for " + path.string());
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

// Writes `<out>.manifest.json`: the effective settings and the digest of
// every input file.
void write_manifest(const fs::path& out, const std::string& command, const json& settings,
                    const std::vector<fs::path>& inputs) {
  json digests = json::object();
  for (const auto& p : inputs) {
    if (!p.empty() && fs::is_regular_file(p)) digests[p.generic_string()] = sha256_file(p);
  }
  const json manifest = {{"command", command}, {"settings", settings}, {"inputs", digests},
                         {"version", NNEL_VERSION}};
  nnel::io::write_file(fs::path(out.string() + ".manifest.json"), manifest.dump(2) + "\n");
}

void emit(const fs::path& out, const std::string& data) {
  if (out.empty()) {
    std::cout << data;
  } else {
    nnel::io::write_file(out, data);
  }
}

std::vector<std::string> read_config_file(const fs::path& path) {
  if (!fs::exists(path)) throw nnel::ValidationError("config file not found: " + path.string());
  return nnel::io::split_lines(nnel::io::read_file(path));
}

// Merges `--config` file entries into args for the chosen subcommand,
// skipping keys that were given explicitly on the command line.
std::vector<std::string> apply_config(CLI::App& app, std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || args.empty()) return args;
  CLI::App* sub = nullptr;
  for (CLI::App* s : app.get_subcommands({})) {
    if (s->get_name() == args.front()) sub = s;
  }
  if (sub == nullptr) return args;

  std::set<std::string> known;
  for (CLI::App* s : app.get_subcommands({})) {
    for (const CLI::Option* o : s->get_options()) {
      for (const auto& n : o->get_lnames()) known.insert(n);
    }
  }
  std::set<std::string> explicit_flags;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) explicit_flags.insert(a.substr(2, a.find('=') - 2));
  }
  const auto lines = read_config_file(config_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = nnel::io::trim(lines[i]);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw nnel::UsageError("config line " + std::to_string(i + 1) + ": expected key=value");
    }
    std::string key(nnel::io::trim(line.substr(0, eq)));
    std::string value(nnel::io::trim(line.substr(eq + 1)));
    for (auto& ch : key) {
      if (ch == '_') ch = '-';
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!known.count(key) || key == "config") {
      if (key == "config") continue;
      throw nnel::UsageError("config line " + std::to_string(i + 1) + ": unknown key '" + key + "'");
    }
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || explicit_flags.count(key)) continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "on" || value == "1" || value == "yes") args.push_back("--" + key);
    } else {
      args.push_back("--" + key);
      args.push_back(value);
    }
  }
  return args;
}

// Options shared by several subcommands, bound straight into the config.
struct Options {
  nnel::PipelineConfig cfg;
  std::string mode = "CL";
  std::string scorer = "lexical";
  std::string endpoint;
  fs::path out;
  fs::path candidates;
  fs::path ranked;
  fs::path inputs_out;
  fs::path ranked_out;
  fs::path candidates_out;
  fs::path config;
  bool keep_going = false;
  int retries = 2;
  int timeout_ms = 30000;
  std::size_t batch_size = 32;

  void finish() {
    cfg.mode = nnel::parse_rank_mode(mode);
    cfg.scorer.mode = cfg.mode;
    cfg.scorer.kind = scorer == "external" ? nnel::ScorerKind::kExternal : nnel::ScorerKind::kLexicalBaseline;
    cfg.scorer.endpoint = endpoint;
    cfg.scorer.validate();
    cfg.client = client();
    if (cfg.k < 1) throw nnel::ValidationError("k must be at least 1");
  }

  nnel::protocol::ClientOptions client() const {
    nnel::protocol::ClientOptions o;
    o.batch_size = batch_size == 0 ? 1 : batch_size;
    o.timeout = std::chrono::milliseconds(timeout_ms);
    o.retries = retries;
    return o;
  }
};

void add_config(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Flat key=value file; explicit flags take precedence");
  sub->add_option("--threads", o.cfg.threads, "Worker threads (0 = all cores); never changes results")
      ->capture_default_str();
}
void add_dict(CLI::App* sub, Options& o) {
  sub->add_option("--dict", o.cfg.dictionary, "Dictionary TSV: cui, name, lang, type")->required();
}
void add_embeddings(CLI::App* sub, Options& o) {
  sub->add_option("--emb", o.cfg.embeddings, "EMB1 entry embeddings; omit to hash-embed the dictionary");
  sub->add_option("--dim", o.cfg.hash_dim, "Hash embedder dimension when --emb is absent")->capture_default_str();
  sub->add_option("--embedder", o.cfg.embedder_endpoint,
                  "External query embedder endpoint (command or tcp://host:port); default hash embedder");
}
void add_corpus(CLI::App* sub, Options& o) {
  sub->add_option("--corpus", o.cfg.corpus, "Corpus JSONL")->required();
}
void add_marking(CLI::App* sub, Options& o, bool query) {
  sub->add_option("--marking", o.cfg.marking, "Boundary cues around the mention (on|off)")->capture_default_str();
  sub->add_option("--window", o.cfg.window, "Rank context characters on each side of the mention")
      ->capture_default_str();
  if (query) {
    sub->add_option("--query-window", o.cfg.query_window,
                    "Retrieval query characters on each side (0 = bare mention)")
        ->capture_default_str();
  }
}
void add_k(CLI::App* sub, Options& o) {
  sub->add_option("--k", o.cfg.k, "Candidates per mention")->capture_default_str();
}
void add_mode(CLI::App* sub, Options& o) {
  sub->add_option("--mode", o.mode, "Rank input construction: CL or LISTWISE")->capture_default_str();
}
void add_scorer(CLI::App* sub, Options& o) {
  sub->add_option("--scorer", o.scorer, "lexical (character-trigram Dice) or external")
      ->check(CLI::IsMember({"lexical", "external"}))
      ->capture_default_str();
  sub->add_option("--endpoint", o.endpoint, "External scorer command or tcp://host:port");
  sub->add_option("--retries", o.retries, "Extra attempts per failed scorer batch")->capture_default_str();
  sub->add_option("--timeout-ms", o.timeout_ms, "Per-response scorer timeout")->capture_default_str();
  sub->add_option("--batch-size", o.batch_size, "Rank inputs per scorer batch")->capture_default_str();
}
void add_eval(CLI::App* sub, Options& o) {
  sub->add_option("--folds", o.cfg.folds, "Cross-validation folds (by document)")->capture_default_str();
  sub->add_flag("--cv", o.cfg.cross_validate, "Report per-fold Acc@1 and CV accuracy");
  sub->add_option("--seed", o.cfg.seed, "Seed for fold assignment")->capture_default_str();
}

nnel::CorpusSplit load_corpus(const fs::path& p) {
  if (!fs::exists(p)) throw nnel::ValidationError("corpus not found: " + p.string());
  return nnel::parse_jsonl_corpus(p);
}

nnel::KnowledgeBase load_dictionary(const fs::path& p, nnel::IngestStats* stats = nullptr) {
  if (!fs::exists(p)) throw nnel::ValidationError("dictionary not found: " + p.string());
  return nnel::ingest_dictionary(p, stats);
}

std::vector<nnel::CandidateList> load_candidates(const fs::path& p) {
  if (!fs::exists(p)) throw nnel::ValidationError("candidates not found: " + p.string());
  return nnel::parse_candidates_jsonl(nnel::io::read_file(p));
}

// ---------------------------------------------------------------------------

int cmd_ingest(Options& o) {
  nnel::IngestStats stats;
  const auto kb = load_dictionary(o.cfg.dictionary, &stats);
  std::map<std::string, std::size_t> by_type;
  for (const auto& c : kb.concepts()) ++by_type[std::string(nnel::to_string(c.semantic_type))];
  const json summary = {{"rows", stats.rows}, {"duplicates", stats.duplicates},
                        {"entries", kb.entry_count()}, {"concepts", kb.concepts().size()},
                        {"concepts_by_type", by_type}};
  emit(o.out, summary.dump(2) + "\n");
  if (!o.out.empty()) write_manifest(o.out, "ingest", summary, {o.cfg.dictionary});
  return 0;
}

int cmd_embed(Options& o, const fs::path& check) {
  const auto kb = load_dictionary(o.cfg.dictionary);
  if (!check.empty()) {
    if (!fs::exists(check)) throw nnel::ValidationError("embeddings not found: " + check.string());
    const auto attached = nnel::attach_embeddings(kb, check);
    const json summary = {{"rows", attached.matrix.rows()}, {"dim", attached.matrix.dim},
                          {"renormalized", attached.renormalized}};
    std::cout << summary.dump(2) << "\n";
    return 0;
  }
  if (o.out.empty()) throw nnel::UsageError("embed needs --out (or --check)");
  if (o.cfg.hash_dim < nnel::kHashEmbedMinDim) throw nnel::ValidationError("--dim must be at least 8");
  const auto m = nnel::hash_embed_dictionary(kb, o.cfg.hash_dim, o.cfg.threads);
  nnel::write_embeddings(m, o.out);
  write_manifest(o.out, "embed", {{"dim", o.cfg.hash_dim}, {"rows", m.rows()}}, {o.cfg.dictionary});
  nnel::log::info("wrote ", m.rows(), " x ", m.dim, " embeddings to ", o.out.string());
  return 0;
}

int cmd_retrieve(Options& o) {
  o.finish();
  nnel::PipelineConfig& c = o.cfg;
  if (!c.embeddings.empty() && !fs::exists(c.embeddings)) {
    throw nnel::ValidationError("embeddings not found: " + c.embeddings.string());
  }
  if (!fs::exists(c.dictionary)) throw nnel::ValidationError("dictionary not found: " + c.dictionary.string());
  const auto split = load_corpus(c.corpus);
  const auto loaded = nnel::load_kb(c);
  auto provider = nnel::make_provider(c, loaded.matrix.dim);
  nnel::RetrieveOptions ropts;
  ropts.k = c.k;
  ropts.marking = c.query_marking();
  ropts.threads = c.threads;
  ropts.keep_going = o.keep_going;
  const auto result = nnel::retrieve_corpus(split, loaded.kb, loaded.matrix, *provider, ropts);
  for (const auto& f : result.failures) nnel::log::warn("skipped ", f.mention_id, ": ", f.message);
  emit(o.out, nnel::candidates_to_jsonl(result.lists));
  if (!o.out.empty()) write_manifest(o.out, "retrieve", nnel::to_json(c), {c.dictionary, c.embeddings, c.corpus});
  return 0;
}

int cmd_rank(Options& o) {
  o.finish();
  const auto split = load_corpus(o.cfg.corpus);
  const auto kb = load_dictionary(o.cfg.dictionary);
  const auto lists = load_candidates(o.candidates);
  if (!o.inputs_out.empty()) {
    std::unordered_map<std::string, const nnel::CandidateList*> by_id;
    for (const auto& l : lists) by_id.emplace(l.mention_id, &l);
    std::ostringstream os;
    for (const auto& d : split.documents) {
      for (const auto& m : d.mentions) {
        auto it = by_id.find(m.mention_id);
        if (it == by_id.end() || it->second->candidates.empty()) continue;
        os << nnel::to_json(nnel::build_rank_input(m, d, *it->second, kb, o.cfg.mode, o.cfg.rank_marking())).dump()
           << "\n";
      }
    }
    nnel::io::write_file(o.inputs_out, os.str());
  }
  auto scorer = nnel::make_scorer(o.cfg);
  const auto ranked = nnel::rank_corpus(split, lists, kb, *scorer, o.cfg.mode, o.cfg.rank_marking(), o.cfg.threads);
  emit(o.out, nnel::ranked_to_jsonl(ranked));
  if (!o.out.empty()) {
    write_manifest(o.out, "rank", nnel::to_json(o.cfg), {o.cfg.dictionary, o.cfg.corpus, o.candidates});
  }
  return 0;
}

int cmd_train_pairs(Options& o) {
  o.cfg.mode = nnel::parse_rank_mode(o.mode);
  const auto split = load_corpus(o.cfg.corpus);
  const auto kb = load_dictionary(o.cfg.dictionary);
  const auto lists = load_candidates(o.candidates);
  const auto pairs = nnel::emit_training_pairs(split, lists, kb, o.cfg.mode, o.cfg.rank_marking());
  std::ostringstream os;
  for (const auto& p : pairs.pairs) os << nnel::to_json(p).dump() << "\n";
  emit(o.out, os.str());
  nnel::log::info("training pairs: ", pairs.pairs.size(), ", gold missed: ", pairs.gold_missed);
  if (!o.out.empty()) {
    json settings = nnel::to_json(o.cfg);
    settings["pairs"] = pairs.pairs.size();
    settings["gold_missed"] = pairs.gold_missed;
    write_manifest(o.out, "train-pairs", settings, {o.cfg.dictionary, o.cfg.corpus, o.candidates});
  }
  return 0;
}

int cmd_eval(Options& o) {
  const auto split = load_corpus(o.cfg.corpus);
  if (!fs::exists(o.ranked)) throw nnel::ValidationError("ranked file not found: " + o.ranked.string());
  const auto ranked = nnel::parse_ranked_jsonl(nnel::io::read_file(o.ranked));
  if (o.cfg.cross_validate && o.cfg.folds < 2) throw nnel::ValidationError("folds must be at least 2");
  const auto reports = nnel::evaluate_tracks(split, ranked, o.cfg, o.cfg.cross_validate);
  bool gate_ok = true;
  json out = json::object();
  json arr = json::array();
  for (const auto& r : reports) {
    gate_ok = gate_ok && r.monotone();
    arr.push_back(nnel::to_json(r));
  }
  out["reports"] = std::move(arr);
  if (!o.candidates.empty()) {
    const auto inv = nnel::rank_invariance_check(load_candidates(o.candidates), ranked, nnel::gold_map(split));
    gate_ok = gate_ok && inv.ok();
    out["invariance"] = nnel::to_json(inv);
    for (const auto& v : inv.violations) nnel::log::warn("invariance: ", v.mention_id, ": ", v.reason);
  }
  std::cout << nnel::format_report_table(reports);
  if (!o.out.empty()) {
    nnel::io::write_file(o.out, out.dump(2) + "\n");
    write_manifest(o.out, "eval", {{"folds", o.cfg.folds}, {"cv", o.cfg.cross_validate}, {"seed", o.cfg.seed}},
                   {o.cfg.corpus, o.ranked, o.candidates});
  }
  if (!gate_ok) {
    std::cerr << "nnel: evaluation gate failed (invariance or monotonicity)\n";
    return static_cast<int>(nnel::ExitCode::kValidation);
  }
  return 0;
}

void check_pipeline_result(const nnel::PipelineResult& r) {
  for (const auto& rep : r.reports) {
    if (!rep.monotone()) throw nnel::ValidationError("non-monotone Acc@k in track " + std::string(nnel::to_string(rep.track)));
  }
  if (!r.invariance.ok()) throw nnel::ValidationError("rank/retrieval invariance gate failed");
}

int cmd_pipeline(Options& o) {
  o.finish();
  o.cfg.validate();
  const auto loaded = nnel::load_kb(o.cfg);
  const auto split = nnel::parse_jsonl_corpus(o.cfg.corpus);
  const auto r = nnel::run_pipeline(o.cfg, loaded, split);
  if (!o.candidates_out.empty()) nnel::io::write_file(o.candidates_out, nnel::candidates_to_jsonl(r.retrieval));
  if (!o.ranked_out.empty()) nnel::io::write_file(o.ranked_out, nnel::ranked_to_jsonl(r.ranked));
  check_pipeline_result(r);
  std::cout << "retrieval\n" << nnel::format_report_table(r.retrieval_reports);
  std::cout << "ranked\n" << nnel::format_report_table(r.reports);
  if (!o.out.empty()) {
    nnel::io::write_file(o.out, nnel::report_json(o.cfg, r).dump(2) + "\n");
    write_manifest(o.out, "pipeline", nnel::to_json(o.cfg), {o.cfg.dictionary, o.cfg.embeddings, o.cfg.corpus});
  }
  return 0;
}

int cmd_ablate(Options& o) {
  o.finish();
  o.cfg.validate();
  const auto loaded = nnel::load_kb(o.cfg);
  const auto split = nnel::parse_jsonl_corpus(o.cfg.corpus);
  nnel::PipelineConfig with = o.cfg, without = o.cfg;
  with.marking = true;
  without.marking = false;
  const auto rw = nnel::run_pipeline(with, loaded, split);
  const auto rwo = nnel::run_pipeline(without, loaded, split);
  check_pipeline_result(rw);
  check_pipeline_result(rwo);
  const auto rows = nnel::ablation_report(rw.reports, rwo.reports);
  std::cout << nnel::format_ablation_table(rows);
  if (!o.out.empty()) {
    json arr = json::array();
    for (const auto& row : rows) arr.push_back(nnel::to_json(row));
    const json out = {{"with_cues", nnel::report_json(with, rw)},
                      {"without_cues", nnel::report_json(without, rwo)},
                      {"ablation", std::move(arr)}};
    nnel::io::write_file(o.out, out.dump(2) + "\n");
    write_manifest(o.out, "ablate", nnel::to_json(o.cfg), {o.cfg.dictionary, o.cfg.embeddings, o.cfg.corpus});
  }
  return 0;
}

struct AugmentOptions {
  std::vector<fs::path> inputs;
  std::string format = "jsonl";
  std::string language = "EN";
  fs::path type_map;
  std::string name = "augmented";
};

int cmd_augment(Options& o, const AugmentOptions& a) {
  if (!fs::exists(a.type_map)) throw nnel::ValidationError("type map not found: " + a.type_map.string());
  const auto map = nnel::load_type_map(a.type_map);
  std::vector<nnel::CorpusSplit> converted;
  std::size_t before = 0;
  for (const auto& in : a.inputs) {
    if (!fs::exists(in)) throw nnel::ValidationError("input not found: " + in.string());
    nnel::CorpusSplit split;
    if (a.format == "standoff") {
      if (!fs::is_directory(in)) throw nnel::ValidationError("standoff input must be a directory: " + in.string());
      split = nnel::parse_standoff_directory(in, nnel::parse_language(a.language), in.filename().string());
    } else {
      split = nnel::parse_jsonl_corpus(in);
    }
    before += split.mention_count();
    converted.push_back(nnel::convert_and_filter(split, map));
  }
  const auto merged = nnel::merge_splits(converted, a.name);
  std::ostringstream os;
  nnel::write_jsonl_corpus(merged, os);
  emit(o.out, os.str());
  nnel::log::info("augment: kept ", merged.mention_count(), " of ", before, " mentions in ",
                  merged.documents.size(), " documents");
  if (!o.out.empty()) {
    std::vector<fs::path> inputs = a.inputs;
    inputs.push_back(a.type_map);
    write_manifest(o.out, "augment",
                   {{"format", a.format}, {"language", a.language}, {"name", a.name},
                    {"mentions_in", before}, {"mentions_out", merged.mention_count()}},
                   inputs);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nnel: retrieve-and-rank linking of nested biomedical mentions to CUIs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NNEL_VERSION);

  Options o;
  fs::path check;
  AugmentOptions aug;

  auto* ingest = app.add_subcommand("ingest", "Validate a dictionary TSV and summarize it");
  add_config(ingest, o);
  add_dict(ingest, o);
  ingest->add_option("--out", o.out, "Summary JSON path (default stdout)");

  auto* embed = app.add_subcommand("embed", "Hash-embed every dictionary entry into an EMB1 file");
  add_config(embed, o);
  add_dict(embed, o);
  embed->add_option("--dim", o.cfg.hash_dim, "Embedding dimension (>= 8)")->capture_default_str();
  embed->add_option("--out", o.out, "EMB1 output path");
  embed->add_option("--check", check, "Instead of writing, attach this EMB1 file and report renormalizations");

  auto* retrieve = app.add_subcommand("retrieve", "Top-k candidate CUIs for every mention");
  add_config(retrieve, o);
  add_dict(retrieve, o);
  add_embeddings(retrieve, o);
  add_corpus(retrieve, o);
  add_k(retrieve, o);
  add_marking(retrieve, o, true);
  retrieve->add_flag("--keep-going", o.keep_going, "Skip mentions whose query fails instead of aborting");
  retrieve->add_option("--out", o.out, "Candidates JSONL (default stdout)");

  auto* rank = app.add_subcommand("rank", "Re-order retrieved candidates with a scorer");
  add_config(rank, o);
  add_dict(rank, o);
  add_corpus(rank, o);
  rank->add_option("--candidates", o.candidates, "Candidates JSONL from retrieve")->required();
  add_mode(rank, o);
  add_scorer(rank, o);
  add_marking(rank, o, false);
  rank->add_option("--inputs-out", o.inputs_out, "Also write the rank-input JSONL here");
  rank->add_option("--out", o.out, "Ranked JSONL (default stdout)");

  auto* pairs = app.add_subcommand("train-pairs", "Emit labelled ranker training pairs");
  add_config(pairs, o);
  add_dict(pairs, o);
  add_corpus(pairs, o);
  pairs->add_option("--candidates", o.candidates, "Candidates JSONL from retrieve")->required();
  add_mode(pairs, o);
  add_marking(pairs, o, false);
  pairs->add_option("--out", o.out, "Training-pairs JSONL (default stdout)");

  auto* eval = app.add_subcommand("eval", "Acc@k report for a ranked file");
  add_config(eval, o);
  add_corpus(eval, o);
  eval->add_option("--ranked", o.ranked, "Ranked JSONL from rank")->required();
  eval->add_option("--candidates", o.candidates, "Candidates JSONL; enables the rank/retrieval invariance gate");
  add_eval(eval, o);
  eval->add_option("--out", o.out, "Report JSON path");

  auto* ablate = app.add_subcommand("ablate", "Run the pipeline with and without boundary cues");
  auto* pipeline = app.add_subcommand("pipeline", "retrieve -> rank -> eval in one run");
  for (auto* sub : {ablate, pipeline}) {
    add_config(sub, o);
    add_dict(sub, o);
    add_embeddings(sub, o);
    add_corpus(sub, o);
    add_k(sub, o);
    add_mode(sub, o);
    add_scorer(sub, o);
    add_eval(sub, o);
    sub->add_option("--out", o.out, "Report JSON path");
  }
  add_marking(pipeline, o, true);
  pipeline->add_option("--candidates-out", o.candidates_out, "Also write retrieval candidates JSONL");
  pipeline->add_option("--ranked-out", o.ranked_out, "Also write ranked JSONL");
  ablate->add_option("--window", o.cfg.window, "Rank context characters on each side of the mention")
      ->capture_default_str();
  ablate->add_option("--query-window", o.cfg.query_window,
                     "Retrieval query characters on each side (0 = bare mention)")
      ->capture_default_str();

  auto* augment = app.add_subcommand("augment", "Convert, type-filter and merge extra training corpora");
  add_config(augment, o);
  augment->add_option("--input", aug.inputs, "Input corpus (JSONL file or standoff directory); repeatable")
      ->required();
  augment->add_option("--format", aug.format, "Input format: jsonl or standoff")
      ->check(CLI::IsMember({"jsonl", "standoff"}))
      ->capture_default_str();
  augment->add_option("--language", aug.language, "Language of standoff inputs (EN or RU)")->capture_default_str();
  augment->add_option("--type-map", aug.type_map, "TSV mapping source tag to DISO, CHEM, ANATOMY or DROP")
      ->required();
  augment->add_option("--name", aug.name, "Name of the merged split")->capture_default_str();
  augment->add_option("--out", o.out, "Output corpus JSONL (default stdout)");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    // --help and --version report success; every other parse error is a
    // usage error whatever CLI11's own code for it.
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(nnel::ExitCode::kUsage);
  } catch (const nnel::Error& e) {
    std::cerr << "nnel: " << e.what() << "\n";
    return static_cast<int>(e.code());
  }

  try {
    if (*ingest) return cmd_ingest(o);
    if (*embed) return cmd_embed(o, check);
    if (*retrieve) return cmd_retrieve(o);
    if (*rank) {
      if (o.candidates.empty() || !fs::exists(o.candidates)) {
        throw nnel::ValidationError("candidates not found: " + o.candidates.string());
      }
      return cmd_rank(o);
    }
    if (*pairs) return cmd_train_pairs(o);
    if (*eval) return cmd_eval(o);
    if (*ablate) return cmd_ablate(o);
    if (*pipeline) return cmd_pipeline(o);
    if (*augment) return cmd_augment(o, aug);
  } catch (const nnel::Error& e) {
    std::cerr << "nnel: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "nnel: " << e.what() << "\n";
    return static_cast<int>(nnel::ExitCode::kRuntime);
  }
  return static_cast<int>(nnel::ExitCode::kUsage);
}
