// Copyright 2026 The treeinfer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace treeinfer {

enum class ErrorCode {
  kUsage,
  kSyntax,
  kSemantic,
  kDepthLimit,
  kDimensionMismatch,
  kIo,
  kUnreachableLeaf,
  kCompilerNotFound,
  kCompilationFailed,
  kSymbolResolution,
  kTimerResolution,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kSyntax: return "syntax";
    case ErrorCode::kSemantic: return "semantic";
    case ErrorCode::kDepthLimit: return "depth-limit";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUnreachableLeaf: return "unreachable-leaf";
    case ErrorCode::kCompilerNotFound: return "compiler-not-found";
    case ErrorCode::kCompilationFailed: return "compilation-failed";
    case ErrorCode::kSymbolResolution: return "symbol-resolution";
    case ErrorCode::kTimerResolution: return "timer-resolution";
  }
  return "unknown";
}

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // True for failures caused by the host environment rather than the inputs.
  bool is_environment() const noexcept {
    return code_ == ErrorCode::kCompilerNotFound;
  }

 private:
  ErrorCode code_;
};

// Syntax error in a text document; line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error(ErrorCode::kSyntax, "line " + std::to_string(line) + ", column " +
                                      std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace treeinfer
