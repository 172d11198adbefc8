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

#include "nnel/protocol.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "nnel/external.hpp"
#include "support/oracles.hpp"

namespace nnel {
namespace {

std::string worker(const std::string& args) { return std::string(NNEL_ECHO_WORKER) + " " + args; }

protocol::ClientOptions fast(int retries = 0) {
  protocol::ClientOptions o;
  o.timeout = std::chrono::milliseconds(2000);
  o.retries = retries;
  return o;
}

RankInput cl_input(const std::string& id, std::size_t n) {
  RankInput in;
  in.mode = RankMode::kCl;
  in.mention_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    in.candidate_cuis.push_back("C" + std::to_string(i));
    in.candidate_names.push_back("name " + std::to_string(i));
    in.sequences.push_back("ctx [SEP] name " + std::to_string(i));
  }
  return in;
}

ScorerSpec external(const std::string& endpoint, RankMode mode = RankMode::kCl) {
  return ScorerSpec{ScorerKind::kExternal, mode, endpoint};
}

TEST(ExternalScorer, AscendingEchoReversesTheOrder) {
  ExternalScorer scorer(external(worker("CL")), fast());
  const std::vector<RankInput> inputs = {cl_input("m1", 4)};
  const auto scores = scorer.score(inputs);
  ASSERT_EQ(scores.size(), 1u);
  CandidateList list{"m1", {}, 4};
  for (int i = 0; i < 4; ++i) list.candidates.push_back({"C" + std::to_string(i), static_cast<EntryId>(i), 1.0});
  EXPECT_EQ(rerank(list, scores[0]).order, (std::vector<std::string>{"C3", "C2", "C1", "C0"}));
}

TEST(ExternalScorer, ListwiseCountsCandidatesFromMarkers) {
  ExternalScorer scorer(external(worker("LISTWISE"), RankMode::kListwise), fast());
  RankInput in = cl_input("m1", 3);
  in.mode = RankMode::kListwise;
  in.sequences = {"ctx [SEP] [ST0] a [ST1] b [ST2] c"};
  const auto scores = scorer.score(std::vector<RankInput>{in});
  EXPECT_EQ(scores.at(0), (std::vector<double>{0, 1, 2}));
}

TEST(ExternalScorer, BatchingPreservesOrder) {
  auto opts = fast();
  opts.batch_size = 3;
  ExternalScorer scorer(external(worker("CL")), opts);
  std::vector<RankInput> inputs;
  for (std::size_t i = 0; i < 10; ++i) inputs.push_back(cl_input("m" + std::to_string(i), i + 1));
  const auto scores = scorer.score(inputs);
  ASSERT_EQ(scores.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(scores[i].size(), i + 1);
}

TEST(ExternalScorer, InterleavedRepliesAreMatchedById) {
  auto opts = fast();
  opts.batch_size = 4;
  ExternalScorer scorer(external(worker("CL --swap")), opts);
  std::vector<RankInput> inputs;
  for (std::size_t i = 0; i < 8; ++i) inputs.push_back(cl_input("m" + std::to_string(i), i + 1));
  const auto scores = scorer.score(inputs);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(scores[i].size(), i + 1);
}

TEST(ExternalScorer, EmptyBatchNeverConnects) {
  // `false` exits immediately, so any connection attempt would fail.
  ExternalScorer scorer(external("false"), fast());
  EXPECT_TRUE(scorer.score({}).empty());
}

TEST(ExternalScorer, MissingScoreIsACountMismatch) {
  ExternalScorer scorer(external(worker("CL --drop-one")), fast(1));
  try {
    scorer.score(std::vector<RankInput>{cl_input("m1", 3)});
    FAIL() << "expected a ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("count mismatch"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("after 2 attempts"), std::string::npos) << e.what();
  }
}

TEST(ExternalScorer, MalformedReplyFails) {
  ExternalScorer scorer(external(worker("CL --malformed")), fast());
  EXPECT_THROW(scorer.score(std::vector<RankInput>{cl_input("m1", 2)}), ProtocolError);
}

TEST(ExternalScorer, NonNumericScoreFails) {
  ExternalScorer scorer(external(worker("CL --nan")), fast());
  EXPECT_THROW(scorer.score(std::vector<RankInput>{cl_input("m1", 2)}), ProtocolError);
}

TEST(ExternalScorer, PeerErrorFails) {
  ExternalScorer scorer(external(worker("CL --error")), fast());
  try {
    scorer.score(std::vector<RankInput>{cl_input("m1", 2)});
    FAIL() << "expected a ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("scripted failure"), std::string::npos) << e.what();
  }
}

TEST(ExternalScorer, SilentPeerTimesOut) {
  auto opts = fast();
  opts.timeout = std::chrono::milliseconds(200);
  ExternalScorer scorer(external(worker("CL --hang")), opts);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(scorer.score(std::vector<RankInput>{cl_input("m1", 2)}), ProtocolError);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(5));
}

TEST(ExternalScorer, HandshakeModeMismatchFails) {
  ExternalScorer scorer(external(worker("CL --wrong-mode LISTWISE")), fast());
  try {
    scorer.score(std::vector<RankInput>{cl_input("m1", 2)});
    FAIL() << "expected a ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("handshake"), std::string::npos) << e.what();
  }
}

TEST(ExternalScorer, RetriesRecoverFromAFailedLaunch) {
  const auto state = std::filesystem::temp_directory_path() / ("nnel_retry_" + std::to_string(::getpid()));
  std::filesystem::remove(state);
  ExternalScorer scorer(external(worker("CL --fail-first 2 --state " + state.string())), fast(2));
  const auto scores = scorer.score(std::vector<RankInput>{cl_input("m1", 2)});
  EXPECT_EQ(scores.at(0).size(), 2u);
  std::filesystem::remove(state);
}

TEST(ExternalScorer, RetriesAreBounded) {
  const auto state = std::filesystem::temp_directory_path() / ("nnel_retry_b_" + std::to_string(::getpid()));
  std::filesystem::remove(state);
  ExternalScorer scorer(external(worker("CL --fail-first 3 --state " + state.string())), fast(1));
  EXPECT_THROW(scorer.score(std::vector<RankInput>{cl_input("m1", 2)}), ProtocolError);
  std::filesystem::remove(state);
}

TEST(ExternalScorer, ModeMismatchIsAUsageError) {
  ExternalScorer scorer(external(worker("CL")), fast());
  RankInput in = cl_input("m1", 2);
  in.mode = RankMode::kListwise;
  EXPECT_THROW(scorer.score(std::vector<RankInput>{in}), UsageError);
}

TEST(ExternalScorer, RequiresAnEndpoint) {
  EXPECT_THROW(ExternalScorer(external("")), UsageError);
}

// Minimal single-connection TCP peer that speaks the CL protocol.
class TcpEcho {
 public:
  TcpEcho() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    ::listen(listen_fd_, 1);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }
  ~TcpEcho() {
    thread_.join();
    ::close(listen_fd_);
  }
  std::string endpoint() const { return "tcp://127.0.0.1:" + std::to_string(port_); }

 private:
  void serve() {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) return;
    std::string buf;
    char chunk[4096];
    for (;;) {
      const auto n = ::read(fd, chunk, sizeof chunk);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      for (auto nl = buf.find('\n'); nl != std::string::npos; nl = buf.find('\n')) {
        const auto req = nlohmann::json::parse(buf.substr(0, nl));
        buf.erase(0, nl + 1);
        nlohmann::json resp;
        if (req.contains("hello")) {
          resp = req;
        } else {
          std::vector<double> scores;
          for (std::size_t i = 0; i < req["sequences"].size(); ++i) scores.push_back(static_cast<double>(i));
          resp = {{"id", req["id"]}, {"scores", scores}};
        }
        const std::string line = resp.dump() + "\n";
        if (::write(fd, line.data(), line.size()) < 0) break;
      }
    }
    ::close(fd);
  }

  int listen_fd_ = -1;
  int port_ = 0;
  std::thread thread_;
};

TEST(ExternalScorer, SpeaksOverTcp) {
  TcpEcho server;
  {
    ExternalScorer scorer(external(server.endpoint()), fast());
    const auto scores = scorer.score(std::vector<RankInput>{cl_input("a", 2), cl_input("b", 3)});
    EXPECT_EQ(scores.at(1), (std::vector<double>{0, 1, 2}));
  }
}

TEST(ExternalEmbedder, ReturnsVectorsAlignedWithQueries) {
  ExternalEmbeddingProvider p(worker("EMBED --dim 16"), fast());
  const std::vector<QueryText> qs = {{"a", "cancer"}, {"b", "fever"}};
  const auto v = p.embed(qs);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].size(), 16u);
}

TEST(ExternalEmbedder, DimensionMismatchIsRejectedBeforeSearch) {
  const auto split = parse_jsonl_corpus(testing::source_path("samples/nested.jsonl"));
  const auto& doc = split.documents[0];
  ExternalEmbeddingProvider p(worker("EMBED --dim 768"), fast());
  EXPECT_THROW(embed_query(doc.mentions[0], doc, p, 64), ValidationError);
}

}  // namespace
}  // namespace nnel
