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

// Code-generation strategy: emit an ensemble as nested if-else C source,
// compile it to a shared object with the host C compiler, load it and expose
// it through the common Evaluator interface.
//
// The loaded entry point is `double score_ensemble(const float* x)`.
// Compiler lookup order: $TREEINFER_CC, $CC, then cc, gcc, clang on $PATH.

#pragma once

#include <dlfcn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treeinfer/error.hpp"
#include "treeinfer/layout.hpp"
#include "treeinfer/model.hpp"
#include "treeinfer/model_io.hpp"

namespace treeinfer {

inline constexpr std::string_view kEntrySymbol = "score_ensemble";

using ScoreFn = double (*)(const float*);

namespace detail {

inline std::string c_literal(double value) {
  std::string s = format_shortest(value);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

inline std::string c_literal_f(float value) {
  std::string s = format_shortest(value);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s + "f";
}

inline void emit_subtree(std::string& out, const Tree& t, std::uint32_t i, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const Node& n = t.node(i);
  if (n.is_leaf()) {
    out += pad + "return " + c_literal_f(narrow(n.value)) + ";\n";
    return;
  }
  out += pad + "if (x[" + std::to_string(n.feature_id) + "] < " +
         c_literal_f(narrow(n.threshold)) + ") {\n";
  emit_subtree(out, t, n.left, indent + 1);
  out += pad + "} else {\n";
  emit_subtree(out, t, n.right, indent + 1);
  out += pad + "}\n";
}

}  // namespace detail

// Deterministic C source for e: one static function per tree plus the
// exported ensemble entry point summing weighted tree outputs in order.
inline std::string emit_source(const Ensemble& e) {
  std::string out;
  out += "/* Generated tree-ensemble scorer. Entry point: " + std::string(kEntrySymbol) +
         ". */\n";
  out += "/* trees: " + std::to_string(e.size()) +
         ", features: " + std::to_string(e.num_features()) + " */\n";
  for (std::size_t t = 0; t < e.size(); ++t) {
    out += "\nstatic float tree_" + std::to_string(t) + "(const float* x) {\n";
    detail::emit_subtree(out, e.trees()[t].tree, 0, 1);
    out += "}\n";
  }
  out += "\ndouble " + std::string(kEntrySymbol) + "(const float* x) {\n";
  out += "  double acc = 0.0;\n";
  if (e.size() == 0) out += "  (void)x;\n";
  for (std::size_t t = 0; t < e.size(); ++t) {
    out += "  acc += " + detail::c_literal(e.trees()[t].weight) + " * (double)tree_" +
           std::to_string(t) + "(x);\n";
  }
  out += "  return acc;\n}\n";
  return out;
}

struct Toolchain {
  std::string compiler;
  std::vector<std::string> flags;
  std::string version;
};

inline std::vector<std::string> default_codegen_flags() {
  return {"-O3", "-fomit-frame-pointer", "-pipe", "-fPIC", "-shared", "-ffp-contract=off"};
}

namespace detail {

inline std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out += "'";
  return out;
}

struct CommandResult {
  int status = -1;
  std::string output;
};

// Runs a shell command, capturing stdout and stderr together.
inline CommandResult run_command(const std::string& command) {
  CommandResult res;
  std::FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return res;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, got);
  const int raw = ::pclose(pipe);
  res.status = (raw != -1 && WIFEXITED(raw)) ? WEXITSTATUS(raw) : -1;
  return res;
}

inline std::optional<std::string> find_on_path(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    if (::access(name.c_str(), X_OK) == 0) return name;
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  if (path == nullptr) return std::nullopt;
  std::stringstream ss(path);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    const std::string candidate = dir + "/" + name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return std::nullopt;
}

inline std::mutex& unit_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

// Locates a usable C compiler, or nullopt when none exists.
inline std::optional<Toolchain> find_toolchain() {
  std::vector<std::string> candidates;
  for (const char* var : {"TREEINFER_CC", "CC"}) {
    if (const char* v = std::getenv(var); v != nullptr && *v != '\0') {
      candidates.emplace_back(v);
      // An explicit override is authoritative.
      if (std::string_view(var) == "TREEINFER_CC") break;
    }
  }
  if (std::getenv("TREEINFER_CC") == nullptr || *std::getenv("TREEINFER_CC") == '\0') {
    for (const char* name : {"cc", "gcc", "clang"}) candidates.emplace_back(name);
  }
  for (const auto& c : candidates) {
    if (auto path = detail::find_on_path(c)) {
      Toolchain tc;
      tc.compiler = *path;
      tc.flags = default_codegen_flags();
      auto ver = detail::run_command(detail::shell_quote(*path) + " --version");
      if (ver.status == 0) {
        tc.version = ver.output.substr(0, ver.output.find('\n'));
      }
      return tc;
    }
  }
  return std::nullopt;
}

// A compiled, loaded scorer. Owns its shared object and build files and
// releases them on destruction.
class GeneratedUnit {
 public:
  GeneratedUnit(const GeneratedUnit&) = delete;
  GeneratedUnit& operator=(const GeneratedUnit&) = delete;

  GeneratedUnit(GeneratedUnit&& other) noexcept { *this = std::move(other); }
  GeneratedUnit& operator=(GeneratedUnit&& other) noexcept {
    if (this != &other) {
      release();
      source_ = std::move(other.source_);
      source_path_ = std::move(other.source_path_);
      library_path_ = std::move(other.library_path_);
      toolchain_ = std::move(other.toolchain_);
      keep_sources_ = other.keep_sources_;
      handle_ = std::exchange(other.handle_, nullptr);
      entry_ = std::exchange(other.entry_, nullptr);
      other.source_path_.clear();
      other.library_path_.clear();
    }
    return *this;
  }

  ~GeneratedUnit() { release(); }

  ScoreFn entry() const { return entry_; }
  double operator()(const float* x) const { return entry_(x); }

  const std::string& source() const { return source_; }
  const std::filesystem::path& source_path() const { return source_path_; }
  const std::filesystem::path& library_path() const { return library_path_; }
  const Toolchain& toolchain() const { return toolchain_; }

 private:
  friend GeneratedUnit compile_and_load(std::string source, const std::filesystem::path& workdir,
                                        bool keep_sources,
                                        const std::optional<Toolchain>& toolchain);
  GeneratedUnit() = default;

  void release() noexcept {
    if (handle_ != nullptr) {
      std::lock_guard<std::mutex> lock(detail::unit_mutex());
      ::dlclose(handle_);
      handle_ = nullptr;
    }
    entry_ = nullptr;
    std::error_code ec;
    if (!library_path_.empty()) std::filesystem::remove(library_path_, ec);
    if (!keep_sources_ && !source_path_.empty()) std::filesystem::remove(source_path_, ec);
  }

  std::string source_;
  std::filesystem::path source_path_;
  std::filesystem::path library_path_;
  Toolchain toolchain_;
  bool keep_sources_ = false;
  void* handle_ = nullptr;
  ScoreFn entry_ = nullptr;
};

// Writes `source` into workdir under a unique name, compiles it to a shared
// object and resolves the entry symbol. Build products are removed when the
// unit is destroyed; the source is kept when keep_sources is set.
inline GeneratedUnit compile_and_load(std::string source, const std::filesystem::path& workdir,
                                      bool keep_sources = false,
                                      const std::optional<Toolchain>& toolchain = std::nullopt) {
  const std::optional<Toolchain> tc = toolchain ? toolchain : find_toolchain();
  if (!tc) {
    throw Error(ErrorCode::kCompilerNotFound,
                "no C compiler found (set TREEINFER_CC); generated strategy unavailable");
  }
  std::error_code ec;
  std::filesystem::create_directories(workdir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + workdir.string() + ": " + ec.message());

  static std::atomic<unsigned> counter{0};
  const std::string stem = "score_ensemble_" + std::to_string(::getpid()) + "_" +
                           std::to_string(counter.fetch_add(1));

  GeneratedUnit unit;
  unit.toolchain_ = *tc;
  unit.keep_sources_ = keep_sources;
  unit.source_path_ = workdir / (stem + ".c");
  write_text_file(unit.source_path_, source);
  unit.source_ = std::move(source);

  const std::filesystem::path lib = workdir / (stem + ".so");
  std::string cmd = detail::shell_quote(tc->compiler);
  for (const auto& f : tc->flags) cmd += " " + detail::shell_quote(f);
  cmd += " -o " + detail::shell_quote(lib.string()) + " " +
         detail::shell_quote(unit.source_path_.string());
  const auto res = detail::run_command(cmd);
  if (res.status != 0) {
    std::filesystem::remove(lib, ec);
    throw Error(ErrorCode::kCompilationFailed,
                "compilation failed (" + cmd + "):\n" + res.output);
  }
  unit.library_path_ = lib;

  std::lock_guard<std::mutex> lock(detail::unit_mutex());
  unit.handle_ = ::dlopen(lib.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (unit.handle_ == nullptr) {
    const char* err = ::dlerror();
    throw Error(ErrorCode::kSymbolResolution,
                std::string("cannot load ") + lib.string() + ": " + (err ? err : "unknown"));
  }
  ::dlerror();
  void* sym = ::dlsym(unit.handle_, std::string(kEntrySymbol).c_str());
  if (sym == nullptr) {
    const char* err = ::dlerror();
    throw Error(ErrorCode::kSymbolResolution,
                "symbol " + std::string(kEntrySymbol) + " not found: " + (err ? err : "null"));
  }
  unit.entry_ = reinterpret_cast<ScoreFn>(sym);
  return unit;
}

namespace detail {

class GeneratedImpl final : public EvaluatorImpl {
 public:
  GeneratedImpl(std::shared_ptr<const GeneratedUnit> unit, std::size_t nodes)
      : unit_(std::move(unit)), fn_(unit_->entry()), nodes_(nodes) {}

  double score(const float* x) const override { return fn_(x); }

  void score_rows(const float* rows, std::size_t n, std::size_t stride,
                  double* out) const override {
    const ScoreFn fn = fn_;
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(rows + i * stride);
  }

  std::size_t stored_nodes() const override { return nodes_; }

 private:
  std::shared_ptr<const GeneratedUnit> unit_;
  ScoreFn fn_;
  std::size_t nodes_;
};

}  // namespace detail

inline Evaluator build_generated(const Ensemble& e, const std::filesystem::path& workdir,
                                 bool keep_sources = false,
                                 const std::optional<Toolchain>& toolchain = std::nullopt) {
  auto unit = std::make_shared<const GeneratedUnit>(
      compile_and_load(emit_source(e), workdir, keep_sources, toolchain));
  std::size_t nodes = 0;
  for (const auto& wt : e.trees()) nodes += wt.tree.node_count();
  return Evaluator(StrategyKind::kGenerated, e.num_features(), 1,
                   std::make_shared<detail::GeneratedImpl>(std::move(unit), nodes));
}

}  // namespace treeinfer
