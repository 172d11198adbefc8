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

// Line-delimited JSON transport to an external worker process or socket.
//
//   handshake   -> {"hello": {"protocol": 1, "mode": <mode>}}
//               <- {"hello": {"protocol": 1, "mode": <mode>}}
//   request     -> {"id": <id>, ...payload}
//   response    <- {"id": <id>, ...result}     (any order, one per request)
//   error reply <- {"id": <id>, "error": "..."}
//
// An endpoint is either "tcp://host:port" or a shell command whose
// stdin/stdout carry the stream.

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nnel/error.hpp"
#include "nnel/log.hpp"

extern char** environ;

namespace nnel::protocol {

inline constexpr int kProtocolVersion = 1;

class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(std::string_view line) = 0;
  // Throws ProtocolError on timeout or end of stream.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

namespace detail {

// Writes without letting a closed peer raise SIGPIPE in this process.
inline void write_all_nosigpipe(int fd, std::string_view data, bool is_socket) {
  sigset_t pipe_set, old_set;
  sigemptyset(&pipe_set);
  sigaddset(&pipe_set, SIGPIPE);
  pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);
  bool broken = false;
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = is_socket ? ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                                : ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      broken = true;
      break;
    }
    off += static_cast<std::size_t>(n);
  }
  if (broken) {
    const timespec zero{0, 0};
    sigset_t pending;
    sigpending(&pending);
    if (sigismember(&pending, SIGPIPE)) sigtimedwait(&pipe_set, nullptr, &zero);
  }
  pthread_sigmask(SIG_SETMASK, &old_set, nullptr);
  if (broken) throw ProtocolError(std::string("write to peer failed: ") + std::strerror(errno));
}

}  // namespace detail

class FdLineChannel : public LineChannel {
 public:
  FdLineChannel(int read_fd, int write_fd, bool is_socket)
      : read_fd_(read_fd), write_fd_(write_fd), is_socket_(is_socket) {}
  ~FdLineChannel() override { close_fds(); }

  FdLineChannel(const FdLineChannel&) = delete;
  FdLineChannel& operator=(const FdLineChannel&) = delete;

  void write_line(std::string_view line) override {
    std::string buf(line);
    buf.push_back('\n');
    detail::write_all_nosigpipe(write_fd_, buf, is_socket_);
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ProtocolError("timed out waiting for peer");
      pollfd p{read_fd_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) throw ProtocolError("timed out waiting for peer");
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw ProtocolError("peer closed the stream");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  void close_write() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (write_fd_ != read_fd_) write_fd_ = -1;
  }
  void close_fds() {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  bool is_socket_;
  std::string buffer_;
};

// Runs `/bin/sh -c <command>` with its stdin/stdout connected to us.
class SubprocessChannel final : public FdLineChannel {
 public:
  static std::unique_ptr<SubprocessChannel> spawn(const std::string& command) {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw RuntimeFailure("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw RuntimeFailure("pipe failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    pid_t pid = -1;
    const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr,
                               const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw RuntimeFailure("cannot start scorer command '" + command + "': " + std::strerror(rc));
    }
    return std::unique_ptr<SubprocessChannel>(new SubprocessChannel(from_child[0], to_child[1], pid));
  }

  ~SubprocessChannel() override {
    close_write();
    // Give the worker a moment to exit on EOF, then make sure it is gone.
    for (int i = 0; i < 20; ++i) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

 private:
  SubprocessChannel(int read_fd, int write_fd, pid_t pid)
      : FdLineChannel(read_fd, write_fd, false), pid_(pid) {}
  pid_t pid_;
};

class TcpChannel final : public FdLineChannel {
 public:
  static std::unique_ptr<TcpChannel> connect(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
      throw ProtocolError("cannot resolve " + host + ":" + port + ": " + gai_strerror(rc));
    }
    int fd = -1;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + port);
    return std::unique_ptr<TcpChannel>(new TcpChannel(fd));
  }

 private:
  explicit TcpChannel(int fd) : FdLineChannel(fd, fd, true) {}
};

inline std::unique_ptr<LineChannel> open_channel(const std::string& endpoint) {
  constexpr std::string_view kTcp = "tcp://";
  if (endpoint.rfind(kTcp, 0) == 0) {
    const std::string rest = endpoint.substr(kTcp.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw UsageError("tcp endpoint needs host:port: " + endpoint);
    return TcpChannel::connect(rest.substr(0, colon), rest.substr(colon + 1));
  }
  if (endpoint.empty()) throw UsageError("empty endpoint");
  return SubprocessChannel::spawn(endpoint);
}

struct ClientOptions {
  std::size_t batch_size = 32;
  std::chrono::milliseconds timeout{30000};
  int retries = 2;  // extra attempts per batch after the first failure
};

// A protocol session with lazy connect + handshake and per-batch retry.
// Each retry reconnects from scratch.
class Client {
 public:
  Client(std::string endpoint, std::string mode, ClientOptions opts = {})
      : endpoint_(std::move(endpoint)), mode_(std::move(mode)), opts_(opts) {}

  const ClientOptions& options() const { return opts_; }

  // Sends `requests` (each must carry a unique string "id") and returns the
  // responses in request order. `check` validates one response for its
  // request and throws ProtocolError if unacceptable.
  using Check = std::function<void(const nlohmann::json& request, const nlohmann::json& response)>;

  std::vector<nlohmann::json> exchange(const std::vector<nlohmann::json>& requests, const Check& check) {
    std::vector<nlohmann::json> out;
    out.reserve(requests.size());
    for (std::size_t begin = 0; begin < requests.size(); begin += opts_.batch_size) {
      const std::size_t end = std::min(requests.size(), begin + opts_.batch_size);
      auto batch = run_batch_with_retry(requests, begin, end, check);
      for (auto& r : batch) out.push_back(std::move(r));
    }
    return out;
  }

  void reset() { channel_.reset(); }

 private:
  void connect() {
    channel_ = open_channel(endpoint_);
    const nlohmann::json hello = {{"hello", {{"protocol", kProtocolVersion}, {"mode", mode_}}}};
    channel_->write_line(hello.dump());
    const auto reply = parse(channel_->read_line(opts_.timeout));
    if (!reply.contains("hello") || !reply["hello"].is_object()) {
      throw ProtocolError("handshake: expected hello, got " + reply.dump());
    }
    const auto& h = reply["hello"];
    if (h.value("protocol", -1) != kProtocolVersion) {
      throw ProtocolError("handshake: unsupported protocol " + h.value("protocol", nlohmann::json()).dump());
    }
    if (h.value("mode", std::string()) != mode_) {
      throw ProtocolError("handshake: peer mode " + h.value("mode", nlohmann::json()).dump() +
                          " does not match " + mode_);
    }
  }

  static nlohmann::json parse(const std::string& line) {
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw ProtocolError("malformed response (not an object): " + line);
      return j;
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("malformed response: " + line.substr(0, 200));
    }
  }

  std::vector<nlohmann::json> run_batch(const std::vector<nlohmann::json>& requests,
                                        std::size_t begin, std::size_t end, const Check& check) {
    if (!channel_) connect();
    std::unordered_map<std::string, std::size_t> pending;
    for (std::size_t i = begin; i < end; ++i) {
      const std::string id = requests[i].at("id").get<std::string>();
      if (!pending.emplace(id, i - begin).second) throw ProtocolError("duplicate request id " + id);
    }
    // Pipelined: write the whole batch, then collect replies in any order.
    for (std::size_t i = begin; i < end; ++i) channel_->write_line(requests[i].dump());
    std::vector<nlohmann::json> out(end - begin);
    std::size_t remaining = end - begin;
    while (remaining > 0) {
      auto resp = parse(channel_->read_line(opts_.timeout));
      if (!resp.contains("id") || !resp["id"].is_string()) {
        throw ProtocolError("response without string id: " + resp.dump().substr(0, 200));
      }
      const std::string id = resp["id"].get<std::string>();
      auto it = pending.find(id);
      if (it == pending.end()) throw ProtocolError("response for unknown or repeated id " + id);
      if (resp.contains("error")) {
        throw ProtocolError("peer error for " + id + ": " + resp["error"].dump());
      }
      check(requests[begin + it->second], resp);
      out[it->second] = std::move(resp);
      pending.erase(it);
      --remaining;
    }
    return out;
  }

  std::vector<nlohmann::json> run_batch_with_retry(const std::vector<nlohmann::json>& requests,
                                                   std::size_t begin, std::size_t end,
                                                   const Check& check) {
    std::string last;
    for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
      try {
        return run_batch(requests, begin, end, check);
      } catch (const RuntimeFailure& e) {
        last = e.what();
        channel_.reset();
        log::warn("protocol: batch starting at request ", begin, " failed (attempt ", attempt + 1,
                  "): ", last);
      }
    }
    throw ProtocolError("batch starting at request " + std::to_string(begin) + " failed after " +
                        std::to_string(opts_.retries + 1) + " attempts: " + last);
  }

  std::string endpoint_;
  std::string mode_;
  ClientOptions opts_;
  std::unique_ptr<LineChannel> channel_;
};

}  // namespace nnel::protocol
