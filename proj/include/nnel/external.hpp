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

// Clients for external workers: a cross-encoder scorer (modes CL and
// LISTWISE) and a query embedder (mode EMBED).
//
//   scorer   -> {"id", "mode", "sequences": [...]}  <- {"id", "scores": [...]}
//   embedder -> {"id", "text"}                      <- {"id", "vector": [...]}

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnel/error.hpp"
#include "nnel/marking.hpp"
#include "nnel/protocol.hpp"
#include "nnel/ranking.hpp"
#include "nnel/retrieval.hpp"

namespace nnel {

namespace detail {

inline std::vector<double> finite_numbers(const nlohmann::json& j, const char* key, const std::string& id) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ProtocolError("response for " + id + " has no '" + key + "' array");
  }
  std::vector<double> out;
  out.reserve(j[key].size());
  for (const auto& v : j[key]) {
    if (!v.is_number()) throw ProtocolError("response for " + id + ": non-numeric entry in '" + key + "'");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ProtocolError("response for " + id + ": non-finite value");
    out.push_back(d);
  }
  return out;
}

}  // namespace detail

class ExternalScorer final : public Scorer {
 public:
  explicit ExternalScorer(const ScorerSpec& spec, protocol::ClientOptions opts = {})
      : mode_(spec.mode), client_(checked_endpoint(spec), std::string(to_string(spec.mode)), opts) {}

  std::vector<std::vector<double>> score(std::span<const RankInput> inputs) override {
    if (inputs.empty()) return {};
    std::vector<nlohmann::json> requests;
    std::vector<std::size_t> expected;
    requests.reserve(inputs.size());
    for (const auto& in : inputs) {
      if (in.mode != mode_) {
        throw UsageError("rank input for " + in.mention_id + " is " + std::string(to_string(in.mode)) +
                         " but the scorer speaks " + std::string(to_string(mode_)));
      }
      requests.push_back({{"id", in.mention_id}, {"mode", to_string(in.mode)}, {"sequences", in.sequences}});
      expected.push_back(in.candidate_cuis.size());
    }
    std::unordered_map<std::string, std::size_t> want;
    for (std::size_t i = 0; i < inputs.size(); ++i) want[inputs[i].mention_id] = expected[i];
    const auto responses = client_.exchange(requests, [&](const nlohmann::json& req, const nlohmann::json& resp) {
      const std::string id = req["id"].get<std::string>();
      const auto scores = detail::finite_numbers(resp, "scores", id);
      if (scores.size() != want.at(id)) {
        throw ProtocolError("count mismatch for " + id + ": got " + std::to_string(scores.size()) +
                            " scores, expected " + std::to_string(want.at(id)));
      }
    });
    std::vector<std::vector<double>> out;
    out.reserve(responses.size());
    for (std::size_t i = 0; i < responses.size(); ++i) {
      out.push_back(detail::finite_numbers(responses[i], "scores", inputs[i].mention_id));
    }
    return out;
  }

 private:
  static const std::string& checked_endpoint(const ScorerSpec& spec) {
    spec.validate();
    if (spec.kind != ScorerKind::kExternal) throw UsageError("ExternalScorer needs an external scorer spec");
    return spec.endpoint;
  }

  RankMode mode_;
  protocol::Client client_;
};

class ExternalEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit ExternalEmbeddingProvider(std::string endpoint, protocol::ClientOptions opts = {})
      : client_(std::move(endpoint), "EMBED", opts) {}

  std::vector<std::vector<float>> embed(std::span<const QueryText> batch) override {
    if (batch.empty()) return {};
    std::vector<nlohmann::json> requests;
    requests.reserve(batch.size());
    for (const auto& q : batch) requests.push_back({{"id", q.id}, {"text", q.text}});
    const auto responses = client_.exchange(requests, [](const nlohmann::json& req, const nlohmann::json& resp) {
      detail::finite_numbers(resp, "vector", req["id"].get<std::string>());
    });
    std::vector<std::vector<float>> out;
    out.reserve(responses.size());
    for (std::size_t i = 0; i < responses.size(); ++i) {
      const auto v = detail::finite_numbers(responses[i], "vector", batch[i].id);
      out.emplace_back(v.begin(), v.end());
    }
    return out;
  }

 private:
  protocol::Client client_;
};

}  // namespace nnel
