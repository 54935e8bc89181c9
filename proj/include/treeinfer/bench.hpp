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

// Timing harness: strategy x depth x feature-count x batch-size sweeps with
// repeated trials, a correctness gate before every timed pass, 95% Student-t
// intervals over trial means, CSV export, and feature-coverage measurement.
//
// Each timed pass is one clock read pair around a full batch prediction of
// all instances into a preallocated buffer. Reported times therefore include
// the weighted ensemble accumulation and, for the generated strategy, one
// indirect call per instance, exactly as for the other strategies.

#pragma once

#include <time.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treeinfer/dataset.hpp"
#include "treeinfer/error.hpp"
#include "treeinfer/generated.hpp"
#include "treeinfer/layout.hpp"
#include "treeinfer/model.hpp"
#include "treeinfer/stats.hpp"
#include "treeinfer/synthgen.hpp"

#ifndef TREEINFER_BUILD_FLAGS
#define TREEINFER_BUILD_FLAGS "unknown"
#endif

namespace treeinfer {

inline constexpr std::size_t kGatePrefix = 1000;

struct BenchConfig {
  std::vector<StrategyKind> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<int> depths{3, 5, 7, 9, 11};
  std::vector<std::size_t> feature_sizes{32, 128, 512};
  std::vector<std::size_t> batch_sizes{1, 8, 16, 32, 64};
  std::size_t instances = 524288;
  std::size_t trials = 5;
  std::uint64_t seed = 42;
  bool warmup = true;
  // Trees per synthetic ensemble; the classic sweep times single trees.
  std::size_t num_trees = 1;
  std::filesystem::path workdir = std::filesystem::temp_directory_path() / "treeinfer-codegen";

  void validate() const {
    if (instances < 1) throw Error(ErrorCode::kUsage, "instances must be >= 1");
    if (trials < 2) throw Error(ErrorCode::kUsage, "trials must be >= 2 for intervals");
    if (strategies.empty()) throw Error(ErrorCode::kUsage, "no strategies selected");
    const bool vpred = std::find(strategies.begin(), strategies.end(),
                                 StrategyKind::kVPredicated) != strategies.end();
    if (vpred && batch_sizes.empty()) {
      throw Error(ErrorCode::kUsage, "vpredicated needs at least one batch size");
    }
    for (std::size_t v : batch_sizes) {
      if (v < 1 || v > kMaxBatchSize) throw Error(ErrorCode::kUsage, "batch size out of range");
    }
    for (int d : depths) {
      if (d < 0) throw Error(ErrorCode::kUsage, "negative depth");
      for (StrategyKind k : strategies) {
        if (is_complete_tree_strategy(k) && d > kMaxCompleteDepth) {
          throw Error(ErrorCode::kDepthLimit,
                      "depth " + std::to_string(d) + " exceeds " +
                          std::to_string(kMaxCompleteDepth) + " for " +
                          std::string(to_string(k)));
        }
      }
    }
    for (std::size_t f : feature_sizes) {
      if (f == 0) throw Error(ErrorCode::kUsage, "feature size must be positive");
    }
  }
};

enum class RowStatus { kOk, kUnavailable, kGateFailed };

inline std::string_view to_string(RowStatus s) {
  switch (s) {
    case RowStatus::kOk: return "ok";
    case RowStatus::kUnavailable: return "unavailable";
    case RowStatus::kGateFailed: return "gate_failed";
  }
  return "unknown";
}

struct BenchRow {
  StrategyKind strategy = StrategyKind::kContiguous;
  int depth = 0;
  std::size_t features = 0;
  std::size_t batch = 1;
  RowStatus status = RowStatus::kOk;
  std::size_t instances = 0;
  std::vector<std::int64_t> elapsed_ns;

  std::vector<double> ns_per_instance() const {
    std::vector<double> out;
    out.reserve(elapsed_ns.size());
    for (auto e : elapsed_ns) {
      out.push_back(static_cast<double>(e) / static_cast<double>(instances));
    }
    return out;
  }
  double mean_ns_per_instance() const { return mean(ns_per_instance()); }
  double ci95_ns_per_instance() const { return ci95_half_width(ns_per_instance()); }

  std::vector<double> elapsed() const { return {elapsed_ns.begin(), elapsed_ns.end()}; }
  double mean_elapsed_ns() const { return mean(elapsed()); }
  double ci95_elapsed_ns() const { return ci95_half_width(elapsed()); }
};

struct BenchReport {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<BenchRow> rows;

  const BenchRow* find(StrategyKind s, int depth, std::size_t features,
                       std::size_t batch = 1) const {
    for (const auto& r : rows) {
      if (r.strategy == s && r.depth == depth && r.features == features && r.batch == batch) {
        return &r;
      }
    }
    return nullptr;
  }
};

namespace detail {

inline void keep_result(const void* p) { asm volatile("" : : "g"(p) : "memory"); }

inline std::int64_t clock_resolution_ns() {
  timespec ts{};
  if (::clock_getres(CLOCK_MONOTONIC, &ts) != 0) return 1;
  const std::int64_t ns = static_cast<std::int64_t>(ts.tv_sec) * 1000000000 + ts.tv_nsec;
  return std::max<std::int64_t>(ns, 1);
}

inline std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        auto s = line.substr(colon + 1);
        s.erase(0, s.find_first_not_of(' '));
        return s;
      }
    }
  }
  return "unknown";
}

inline std::string compiler_id() {
#if defined(__clang__)
  return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  return std::string("gcc ") + __VERSION__;
#else
  return "unknown";
#endif
}

inline std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline std::vector<std::pair<std::string, std::string>> environment_metadata() {
  return {
      {"cpu", detail::cpu_model()},
      {"compiler", detail::compiler_id()},
      {"flags", TREEINFER_BUILD_FLAGS},
      {"date", detail::utc_now()},
      {"timing", "whole-pass monotonic clock; includes ensemble accumulation"},
      {"generated", "called through a function pointer, like every strategy"},
      {"interval", "95% Student-t over trial means"},
  };
}

// True iff the evaluator reproduces reference_score() bit for bit on the
// first `prefix` rows.
inline bool passes_gate(const Evaluator& ev, const Ensemble& e, const Dataset& data,
                        std::size_t prefix = kGatePrefix) {
  const Dataset head = data.prefix(prefix);
  const auto got = ev.predict_batch(head);
  for (std::size_t i = 0; i < head.size(); ++i) {
    const double want = reference_score(e, head.row(i));
    if (std::bit_cast<std::uint64_t>(got[i]) != std::bit_cast<std::uint64_t>(want)) return false;
  }
  return true;
}

// One timed pass over all rows into `out`; optional untimed pass first.
inline std::int64_t timed_pass(const Evaluator& ev, const Dataset& data, std::span<double> out,
                               bool warmup) {
  if (warmup) {
    ev.predict_batch(data, out);
    detail::keep_result(out.data());
  }
  const auto t0 = std::chrono::steady_clock::now();
  ev.predict_batch(data, out);
  detail::keep_result(out.data());
  const auto t1 = std::chrono::steady_clock::now();
  const auto elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
  const std::int64_t floor_ns = 1000 * detail::clock_resolution_ns();
  if (elapsed < floor_ns) {
    throw Error(ErrorCode::kTimerResolution,
                "timed pass took " + std::to_string(elapsed) + " ns, below 1000x the clock "
                "resolution; use more instances");
  }
  return elapsed;
}

namespace detail {

struct Variant {
  StrategyKind kind;
  std::size_t batch;
};

inline std::vector<Variant> expand_variants(const std::vector<StrategyKind>& strategies,
                                            const std::vector<std::size_t>& batches) {
  std::vector<Variant> out;
  for (StrategyKind k : strategies) {
    if (k == StrategyKind::kVPredicated) {
      for (std::size_t v : batches) out.push_back({k, v});
    } else {
      out.push_back({k, 1});
    }
  }
  return out;
}

// Times every variant once on (e, data), appending to the matching rows.
inline void time_variants(const Ensemble& e, const Dataset& data,
                          const std::vector<Variant>& variants, std::span<BenchRow*> rows,
                          bool warmup, bool toolchain_available,
                          const std::filesystem::path& workdir) {
  std::vector<double> out(data.size());
  std::optional<Evaluator> generated;
  for (std::size_t k = 0; k < variants.size(); ++k) {
    BenchRow& row = *rows[k];
    if (row.status != RowStatus::kOk) continue;
    const Variant& var = variants[k];
    std::optional<Evaluator> ev;
    if (var.kind == StrategyKind::kGenerated) {
      if (!toolchain_available) {
        row.status = RowStatus::kUnavailable;
        continue;
      }
      if (!generated) generated = build_generated(e, workdir);
      ev = generated;
    } else if (var.kind == StrategyKind::kVPredicated) {
      ev = build(e, var.kind, var.batch);
    } else {
      ev = build(e, var.kind);
    }
    if (!passes_gate(*ev, e, data)) {
      row.status = RowStatus::kGateFailed;
      row.elapsed_ns.clear();
      continue;
    }
    row.elapsed_ns.push_back(timed_pass(*ev, data, out, warmup));
  }
}

}  // namespace detail

// Synthetic sweep: every trial draws a fresh tree (or ensemble) and a fresh
// leaf-uniform dataset per (depth, features) cell.
inline BenchReport run_sweep(const BenchConfig& cfg) {
  cfg.validate();
  BenchReport report;
  report.metadata = environment_metadata();
  const bool has_cc = find_toolchain().has_value();
  const auto variants = detail::expand_variants(cfg.strategies, cfg.batch_sizes);
  for (int d : cfg.depths) {
    for (std::size_t f : cfg.feature_sizes) {
      for (const auto& var : variants) {
        BenchRow row;
        row.strategy = var.kind;
        row.depth = d;
        row.features = f;
        row.batch = var.batch;
        row.instances = cfg.instances;
        report.rows.push_back(row);
      }
    }
  }
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    std::size_t cell = 0;
    for (int d : cfg.depths) {
      for (std::size_t f : cfg.feature_sizes) {
        GenConfig g;
        g.depth = d;
        g.num_features = f;
        g.num_vectors = cfg.instances;
        g.seed = derive_seed(cfg.seed, trial * 1000003ull + static_cast<std::uint64_t>(d) * 1009ull + f);
        const Ensemble e = gen_ensemble(g, cfg.num_trees);
        const Dataset data = gen_leaf_uniform_vectors(e.trees().front().tree, g);
        std::vector<BenchRow*> rows;
        for (std::size_t k = 0; k < variants.size(); ++k) {
          rows.push_back(&report.rows[cell * variants.size() + k]);
        }
        detail::time_variants(e, data, variants, rows, cfg.warmup, has_cc, cfg.workdir);
        ++cell;
      }
    }
  }
  return report;
}

// Times a fixed model and dataset `trials` times.
inline BenchReport run_fixed(const Ensemble& e, const Dataset& data,
                             const std::vector<StrategyKind>& strategies,
                             const std::vector<std::size_t>& batches, std::size_t trials,
                             bool warmup, const std::filesystem::path& workdir) {
  if (data.num_features() != e.num_features()) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset and model feature counts differ");
  }
  if (data.empty()) throw Error(ErrorCode::kUsage, "dataset is empty");
  if (trials < 2) throw Error(ErrorCode::kUsage, "trials must be >= 2 for intervals");
  BenchReport report;
  report.metadata = environment_metadata();
  const auto variants = detail::expand_variants(strategies, batches);
  for (const auto& var : variants) {
    if (is_complete_tree_strategy(var.kind) && e.max_depth() > kMaxCompleteDepth) {
      throw Error(ErrorCode::kDepthLimit, "model too deep for " + std::string(to_string(var.kind)));
    }
    BenchRow row;
    row.strategy = var.kind;
    row.depth = e.max_depth();
    row.features = e.num_features();
    row.batch = var.batch;
    row.instances = data.size();
    report.rows.push_back(row);
  }
  const bool has_cc = find_toolchain().has_value();
  std::vector<BenchRow*> rows;
  for (auto& r : report.rows) rows.push_back(&r);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    detail::time_variants(e, data, variants, rows, warmup, has_cc, workdir);
  }
  return report;
}

struct BatchPoint {
  std::size_t batch;
  double mean_ns;
  double ci95_ns;
};

struct TuneResult {
  int depth;
  std::size_t features;
  std::size_t best_batch;
  std::vector<BatchPoint> curve;
};

// Per (depth, features) cell of the vpredicated rows: the full v-curve and
// its argmin, ties going to the smaller v.
inline std::vector<TuneResult> select_batch_sizes(const BenchReport& report) {
  std::vector<TuneResult> out;
  for (const auto& r : report.rows) {
    if (r.strategy != StrategyKind::kVPredicated || r.status != RowStatus::kOk) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const TuneResult& t) {
      return t.depth == r.depth && t.features == r.features;
    });
    if (it == out.end()) {
      out.push_back({r.depth, r.features, r.batch, {}});
      it = out.end() - 1;
    }
    it->curve.push_back({r.batch, r.mean_ns_per_instance(), r.ci95_ns_per_instance()});
  }
  for (auto& t : out) {
    std::sort(t.curve.begin(), t.curve.end(),
              [](const BatchPoint& a, const BatchPoint& b) { return a.batch < b.batch; });
    const BatchPoint* best = &t.curve.front();
    for (const auto& p : t.curve) {
      if (p.mean_ns < best->mean_ns) best = &p;
    }
    t.best_batch = best->batch;
  }
  return out;
}

inline std::vector<TuneResult> tune_v(const BenchConfig& cfg) {
  BenchConfig c = cfg;
  c.strategies = {StrategyKind::kVPredicated};
  return select_batch_sizes(run_sweep(c));
}

struct CoverageReport {
  std::size_t instances = 0;
  std::size_t num_features = 0;
  // Fraction of the feature space examined per instance.
  double mean_fraction = 0.0;
  double variance = 0.0;
};

inline CoverageReport measure_feature_coverage(const Ensemble& e, const Dataset& data) {
  if (!data.empty() && data.num_features() != e.num_features()) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset and model feature counts differ");
  }
  CoverageReport rep;
  rep.instances = data.size();
  rep.num_features = e.num_features();
  std::vector<double> fractions;
  fractions.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto traced = predict_ensemble_traced(e, data.row(i));
    fractions.push_back(static_cast<double>(traced.visited_features.size()) /
                        static_cast<double>(e.num_features()));
  }
  rep.mean_fraction = mean(fractions);
  if (fractions.size() >= 2) {
    double s = 0.0;
    for (double x : fractions) s += (x - rep.mean_fraction) * (x - rep.mean_fraction);
    rep.variance = s / static_cast<double>(fractions.size());
  }
  return rep;
}

// CSV ----------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "strategy,depth,features,batch,trial,elapsed_ns,instances,ns_per_instance";

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string row_prefix(const BenchRow& r) {
  return std::string(to_string(r.strategy)) + "," + std::to_string(r.depth) + "," +
         std::to_string(r.features) + "," + std::to_string(r.batch) + ",";
}

inline std::string mean_line(const BenchRow& r) {
  return row_prefix(r) + "mean," + fixed(r.mean_elapsed_ns(), 1) + "," +
         std::to_string(r.instances) + "," + fixed(r.mean_ns_per_instance(), 4);
}

inline std::string ci_line(const BenchRow& r) {
  return row_prefix(r) + "ci95," + fixed(r.ci95_elapsed_ns(), 1) + "," +
         std::to_string(r.instances) + "," + fixed(r.ci95_ns_per_instance(), 4);
}

}  // namespace detail

// One line per trial, then `mean` and `ci95` aggregate lines per row. Rows
// without timings are a single line whose trial column is the status.
inline std::string export_csv(const BenchReport& report) {
  std::string out;
  for (const auto& [k, v] : report.metadata) out += "# " + k + ": " + v + "\n";
  out += std::string(kCsvHeader) + "\n";
  for (const auto& r : report.rows) {
    if (r.status != RowStatus::kOk || r.elapsed_ns.empty()) {
      out += detail::row_prefix(r) +
             std::string(r.status == RowStatus::kOk ? "untimed" : to_string(r.status)) + ",," +
             std::to_string(r.instances) + ",\n";
      continue;
    }
    const auto per = r.ns_per_instance();
    for (std::size_t t = 0; t < r.elapsed_ns.size(); ++t) {
      out += detail::row_prefix(r) + std::to_string(t) + "," + std::to_string(r.elapsed_ns[t]) +
             "," + std::to_string(r.instances) + "," + detail::fixed(per[t], 4) + "\n";
    }
    out += detail::mean_line(r) + "\n";
    out += detail::ci_line(r) + "\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
T csv_number(std::string_view s, std::size_t line, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError(line, 1, std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

// Rebuilds a report from exported CSV. Aggregates are recomputed from the
// integer trial timings and checked against the aggregate lines.
inline BenchReport parse_csv(std::string_view text) {
  BenchReport report;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      line.remove_prefix(1);
      if (!line.empty() && line.front() == ' ') line.remove_prefix(1);
      const auto colon = line.find(": ");
      if (colon == std::string_view::npos) {
        report.metadata.emplace_back(std::string(line), "");
      } else {
        report.metadata.emplace_back(std::string(line.substr(0, colon)),
                                     std::string(line.substr(colon + 2)));
      }
      continue;
    }
    if (!header_seen) {
      if (line != kCsvHeader) throw ParseError(line_no, 1, "unexpected CSV header");
      header_seen = true;
      continue;
    }
    const auto fields = detail::split_fields(line);
    if (fields.size() != 8) throw ParseError(line_no, 1, "expected 8 fields");
    const auto kind = parse_strategy(fields[0]);
    if (!kind) throw ParseError(line_no, 1, "unknown strategy '" + std::string(fields[0]) + "'");
    BenchRow key;
    key.strategy = *kind;
    key.depth = detail::csv_number<int>(fields[1], line_no, "depth");
    key.features = detail::csv_number<std::size_t>(fields[2], line_no, "features");
    key.batch = detail::csv_number<std::size_t>(fields[3], line_no, "batch");
    key.instances = detail::csv_number<std::size_t>(fields[6], line_no, "instances");
    const std::string_view trial = fields[4];

    BenchRow* row = report.rows.empty() ? nullptr : &report.rows.back();
    const bool same = row != nullptr && row->strategy == key.strategy &&
                      row->depth == key.depth && row->features == key.features &&
                      row->batch == key.batch && row->status == RowStatus::kOk &&
                      !row->elapsed_ns.empty();
    if (trial == "unavailable" || trial == "gate_failed" || trial == "untimed") {
      key.status = trial == "unavailable"   ? RowStatus::kUnavailable
                   : trial == "gate_failed" ? RowStatus::kGateFailed
                                            : RowStatus::kOk;
      report.rows.push_back(key);
    } else if (trial == "mean" || trial == "ci95") {
      if (!same) throw ParseError(line_no, 1, "aggregate line without trial lines");
      const std::string expect = trial == "mean" ? detail::mean_line(*row) : detail::ci_line(*row);
      if (expect != line) {
        throw ParseError(line_no, 1, "aggregate does not match trial timings");
      }
    } else {
      const auto t = detail::csv_number<std::size_t>(trial, line_no, "trial");
      const auto elapsed = detail::csv_number<std::int64_t>(fields[5], line_no, "elapsed_ns");
      if (!same || t == 0) {
        if (t != 0) throw ParseError(line_no, 1, "trial lines must start at 0");
        report.rows.push_back(key);
        row = &report.rows.back();
      } else if (t != row->elapsed_ns.size()) {
        throw ParseError(line_no, 1, "trial lines out of order");
      }
      row->elapsed_ns.push_back(elapsed);
    }
  }
  if (!header_seen) throw ParseError(line_no + 1, 1, "missing CSV header");
  return report;
}

}  // namespace treeinfer
