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

#include <stdexcept>
#include <string>

namespace nnel {

// Process exit codes used by the CLI. Every library error maps to one.
enum class ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad flags or configuration values.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::kUsage, what) {}
};

// Input data that violates a documented format or invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ExitCode::kValidation, what) {}
};

// I/O, transport and other failures that are not the input's fault.
class RuntimeFailure : public Error {
 public:
  explicit RuntimeFailure(const std::string& what)
      : Error(ExitCode::kRuntime, what) {}
};

// Scorer/embedder wire protocol violations (timeouts, malformed replies).
class ProtocolError : public RuntimeFailure {
 public:
  explicit ProtocolError(const std::string& what) : RuntimeFailure(what) {}
};

}  // namespace nnel
