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

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>

namespace nnel::log {

enum class Level : int { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

// Threshold comes from NNEL_LOG (debug|info|warn|error|off), default warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("NNEL_LOG");
    if (env == nullptr) return Level::kWarn;
    const std::string_view v(env);
    if (v == "debug") return Level::kDebug;
    if (v == "info") return Level::kInfo;
    if (v == "error") return Level::kError;
    if (v == "off") return Level::kOff;
    return Level::kWarn;
  }();
  return level;
}

inline void write(Level level, std::string_view message) {
  if (level < threshold()) return;
  static std::mutex mu;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[nnel " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

template <class... Args>
void emit(Level level, const Args&... args) {
  if (level < threshold()) return;
  std::ostringstream os;
  (os << ... << args);
  write(level, os.str());
}

template <class... Args> void debug(const Args&... a) { emit(Level::kDebug, a...); }
template <class... Args> void info(const Args&... a) { emit(Level::kInfo, a...); }
template <class... Args> void warn(const Args&... a) { emit(Level::kWarn, a...); }

}  // namespace nnel::log
