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

// treeinfer command-line driver. Exit status: 0 success, 1 usage error,
// 2 model or data error, 3 environment error (no usable C compiler, timer too
// coarse). Errors go to stderr; results go to stdout unless --out is given.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "treeinfer.hpp"

namespace ti = treeinfer;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitEnvironment = 3;

int exit_code_for(ti::ErrorCode c) {
  switch (c) {
    case ti::ErrorCode::kUsage:
      return kExitUsage;
    case ti::ErrorCode::kCompilerNotFound:
    case ti::ErrorCode::kCompilationFailed:
    case ti::ErrorCode::kSymbolResolution:
    case ti::ErrorCode::kTimerResolution:
      return kExitEnvironment;
    default:
      return kExitData;
  }
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    ti::write_text_file(out, text);
  }
}

// Resolves a --strategies list. "all" selects every strategy. Returns
// whether vpredicated was named explicitly, since that requires --batch.
std::vector<ti::StrategyKind> resolve_strategies(const std::vector<std::string>& names,
                                                 bool& vpred_named) {
  vpred_named = false;
  std::vector<ti::StrategyKind> out;
  auto add = [&](ti::StrategyKind k) {
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  };
  for (const auto& n : names) {
    if (n == "all") {
      for (auto k : ti::kAllStrategies) add(k);
      continue;
    }
    const auto k = ti::parse_strategy(n);
    if (!k) throw ti::Error(ti::ErrorCode::kUsage, "unknown strategy '" + n + "'");
    if (*k == ti::StrategyKind::kVPredicated) vpred_named = true;
    add(*k);
  }
  if (out.empty()) throw ti::Error(ti::ErrorCode::kUsage, "no strategies selected");
  return out;
}

struct GenModelArgs {
  int depth = 3;
  std::size_t features = 32;
  std::size_t trees = 1;
  std::uint64_t seed = 1;
  std::string out;
};

struct GenDataArgs {
  std::string model;
  std::size_t count = 524288;
  std::uint64_t seed = 1;
  std::string out;
  bool csv = false;
};

struct BenchArgs {
  std::string model;
  bool sweep = false;
  std::string data;
  std::vector<std::string> strategies{"all"};
  std::vector<std::size_t> batches;
  std::size_t trials = 5;
  std::size_t instances = 524288;
  bool no_warmup = false;
  std::string out;
  std::vector<int> depths{3, 5, 7, 9, 11};
  std::vector<std::size_t> features{32, 128, 512};
  std::size_t trees = 1;
  std::uint64_t seed = 42;
  std::string workdir;
};

struct TuneArgs {
  std::string model;
  std::string data;
  std::vector<std::size_t> batches{1, 8, 16, 32, 64};
  std::size_t trials = 5;
  bool no_warmup = false;
  std::string out;
};

struct CoverageArgs {
  std::string model;
  std::string data;
};

struct CodegenArgs {
  std::string model;
  std::string out;
  bool keep_sources = false;
  bool compile = false;
};

std::filesystem::path workdir_or_default(const std::string& w) {
  return w.empty() ? ti::BenchConfig{}.workdir : std::filesystem::path(w);
}

int run_gen_model(const GenModelArgs& a) {
  ti::GenConfig cfg;
  cfg.depth = a.depth;
  cfg.num_features = a.features;
  cfg.seed = a.seed;
  cfg.validate();
  const ti::Ensemble e = a.trees == 1 ? ti::Ensemble::single(a.features, ti::gen_tree(cfg))
                                      : ti::gen_ensemble(cfg, a.trees);
  emit(ti::serialize_model(e), a.out);
  return 0;
}

ti::Dataset leaf_uniform_for(const ti::Ensemble& e, std::size_t count, std::uint64_t seed) {
  ti::GenConfig cfg;
  cfg.num_features = e.num_features();
  cfg.num_vectors = count;
  cfg.seed = seed;
  // Leaf-uniform with respect to the first tree; an empty ensemble gets
  // uniform vectors.
  if (e.size() == 0) return ti::gen_uniform_vectors(cfg);
  return ti::gen_leaf_uniform_vectors(e.trees().front().tree, cfg);
}

int run_gen_data(const GenDataArgs& a) {
  const ti::Ensemble e = ti::load_model(a.model);
  const ti::Dataset d = leaf_uniform_for(e, a.count, a.seed);
  if (a.out.empty()) {
    if (!a.csv) throw ti::Error(ti::ErrorCode::kUsage, "binary output needs --out (or use --csv)");
    std::cout << ti::encode_csv(d);
  } else {
    ti::save_dataset(a.out, d, a.csv);
  }
  return 0;
}

int run_validate(const std::string& path) {
  const ti::Ensemble e = ti::load_model(path);
  std::size_t nodes = 0;
  for (const auto& wt : e.trees()) nodes += wt.tree.node_count();
  const ti::TreeStats s = ti::tree_stats(e);
  std::printf("ok: %zu trees, %zu features, %zu nodes, max depth %d, mean depth %.3f\n",
              e.size(), e.num_features(), nodes, e.max_depth(), s.avg_depth);
  return 0;
}

int report_status(const ti::BenchReport& r, bool generated_named) {
  int code = 0;
  for (const auto& row : r.rows) {
    if (row.status == ti::RowStatus::kGateFailed) {
      std::cerr << "error: " << ti::to_string(row.strategy) << " (batch " << row.batch
                << ") disagreed with the reference scorer\n";
      code = kExitData;
    } else if (row.status == ti::RowStatus::kUnavailable) {
      std::cerr << "warning: generated strategy unavailable: no C compiler found "
                   "(set TREEINFER_CC)\n";
      if (generated_named && code == 0) code = kExitEnvironment;
    }
  }
  return code;
}

int run_bench(const BenchArgs& a) {
  if (a.sweep == !a.model.empty()) {
    throw ti::Error(ti::ErrorCode::kUsage, "give exactly one of --model or --sweep");
  }
  bool vpred_named = false;
  const auto strategies = resolve_strategies(a.strategies, vpred_named);
  if (vpred_named && a.batches.empty()) {
    throw ti::Error(ti::ErrorCode::kUsage, "vpredicated requires --batch");
  }
  const bool generated_named =
      std::find(a.strategies.begin(), a.strategies.end(), "generated") != a.strategies.end();
  const std::vector<std::size_t> batches =
      a.batches.empty() ? ti::BenchConfig{}.batch_sizes : a.batches;

  ti::BenchReport report;
  if (a.sweep) {
    if (!a.data.empty()) throw ti::Error(ti::ErrorCode::kUsage, "--data is not used with --sweep");
    ti::BenchConfig cfg;
    cfg.strategies = strategies;
    cfg.depths = a.depths;
    cfg.feature_sizes = a.features;
    cfg.batch_sizes = batches;
    cfg.instances = a.instances;
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.warmup = !a.no_warmup;
    cfg.num_trees = a.trees;
    cfg.workdir = workdir_or_default(a.workdir);
    report = ti::run_sweep(cfg);
  } else {
    const ti::Ensemble e = ti::load_model(a.model);
    ti::Dataset data = a.data.empty() ? leaf_uniform_for(e, a.instances, a.seed)
                                      : ti::load_dataset(a.data);
    if (!a.data.empty() && data.size() > a.instances) data = data.prefix(a.instances);
    report = ti::run_fixed(e, data, strategies, batches, a.trials, !a.no_warmup,
                           workdir_or_default(a.workdir));
    report.metadata.emplace_back("model", a.model);
  }
  emit(ti::export_csv(report), a.out);
  return report_status(report, generated_named);
}

int run_tune(const TuneArgs& a) {
  if (a.batches.empty()) throw ti::Error(ti::ErrorCode::kUsage, "--batches is empty");
  const ti::Ensemble e = ti::load_model(a.model);
  const ti::Dataset data = ti::load_dataset(a.data);
  ti::BenchReport report = ti::run_fixed(e, data, {ti::StrategyKind::kVPredicated}, a.batches,
                                         a.trials, !a.no_warmup, ti::BenchConfig{}.workdir);
  const auto tuned = ti::select_batch_sizes(report);
  if (tuned.empty()) throw ti::Error(ti::ErrorCode::kSemantic, "no timed rows to tune over");
  report.metadata.emplace_back("best_batch", std::to_string(tuned.front().best_batch));
  emit(ti::export_csv(report), a.out);
  std::cerr << "best batch size: " << tuned.front().best_batch << "\n";
  return report_status(report, false);
}

int run_coverage(const CoverageArgs& a) {
  const ti::Ensemble e = ti::load_model(a.model);
  const ti::Dataset data = ti::load_dataset(a.data);
  const ti::CoverageReport r = ti::measure_feature_coverage(e, data);
  std::printf("instances %zu\nfeatures %zu\nmean_fraction %.6f\nvariance %.6g\n", r.instances,
              r.num_features, r.mean_fraction, r.variance);
  return 0;
}

int run_codegen(const CodegenArgs& a) {
  const ti::Ensemble e = ti::load_model(a.model);
  const std::filesystem::path dir = a.out;
  std::filesystem::create_directories(dir);
  const std::string source = ti::emit_source(e);
  if (!a.compile) {
    ti::write_text_file(dir / "score_ensemble.c", source);
    std::cout << (dir / "score_ensemble.c").string() << "\n";
    return 0;
  }
  // Compile, load and check the result against the reference scorer.
  const ti::GeneratedUnit unit = ti::compile_and_load(source, dir, a.keep_sources);
  ti::GenConfig cfg;
  cfg.num_features = e.num_features();
  cfg.num_vectors = 1000;
  cfg.seed = 7;
  const ti::Dataset probe = ti::gen_uniform_vectors(cfg);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    if (unit(probe.row(i).data()) != ti::reference_score(e, probe.row(i))) {
      throw ti::Error(ti::ErrorCode::kCompilationFailed,
                      "compiled scorer disagrees with the reference on probe row " +
                          std::to_string(i));
    }
  }
  std::cout << "compiled with " << unit.toolchain().compiler << "; " << ti::kEntrySymbol
            << " matches the reference on " << probe.size() << " probe rows\n";
  if (a.keep_sources) std::cout << unit.source_path().string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"treeinfer: tree-ensemble inference strategies and benchmarks"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(34);

  GenModelArgs gm;
  auto* c_gm = app.add_subcommand("gen-model", "Generate a random complete tree or ensemble");
  c_gm->add_option("--depth", gm.depth, "Tree depth")->capture_default_str();
  c_gm->add_option("--features", gm.features, "Feature count")->capture_default_str();
  c_gm->add_option("--trees", gm.trees, "Number of trees")->capture_default_str();
  c_gm->add_option("--seed", gm.seed, "Random seed")->capture_default_str();
  c_gm->add_option("--out", gm.out, "Output model path (stdout if omitted)");

  GenDataArgs gd;
  auto* c_gd = app.add_subcommand(
      "gen-data", "Generate vectors landing uniformly on the leaves of the model's first tree");
  c_gd->add_option("--model", gd.model, "Model path")->required();
  c_gd->add_option("--count", gd.count, "Number of vectors")->capture_default_str();
  c_gd->add_option("--seed", gd.seed, "Random seed")->capture_default_str();
  c_gd->add_option("--out", gd.out, "Output dataset path");
  c_gd->add_flag("--csv", gd.csv, "Write CSV instead of binary FVEC");

  std::string validate_path;
  auto* c_val = app.add_subcommand("validate", "Parse and check a model file");
  c_val->add_option("path", validate_path, "Model path")->required();

  BenchArgs b;
  auto* c_b = app.add_subcommand(
      "bench",
      "Time strategies. vpredicated scores rows in batches of v; a final partial batch\n"
      "is scored one row at a time rather than padded.");
  c_b->add_option("--model", b.model, "Model path (fixed mode)");
  c_b->add_flag("--sweep", b.sweep, "Regenerate a fresh model and data for every trial and cell");
  c_b->add_option("--data", b.data,
                  "Dataset path (fixed mode; leaf-uniform data is generated if omitted)");
  c_b->add_option("--strategies,--strategy", b.strategies,
                  "Comma list of heap_linked, compact_linked, contiguous, predicated,\n"
                  "vpredicated, generated, or all")
      ->delimiter(',')
      ->capture_default_str();
  c_b->add_option("--batch", b.batches,
                  "Comma list of vpredicated batch sizes (required when vpredicated is\n"
                  "named; all uses 1,8,16,32,64)")
      ->delimiter(',');
  c_b->add_option("--trials", b.trials, "Trials per cell")->capture_default_str();
  c_b->add_option("--instances", b.instances, "Vectors per trial")->capture_default_str();
  c_b->add_flag("--no-warmup", b.no_warmup, "Skip the untimed warmup pass");
  c_b->add_option("--out", b.out, "Output CSV path (stdout if omitted)");
  c_b->add_option("--depths", b.depths, "Sweep depths")->delimiter(',')->capture_default_str();
  c_b->add_option("--features", b.features, "Sweep feature counts")
      ->delimiter(',')
      ->capture_default_str();
  c_b->add_option("--trees", b.trees, "Trees per sweep ensemble")->capture_default_str();
  c_b->add_option("--seed", b.seed, "Base seed for generated models and data")
      ->capture_default_str();
  c_b->add_option("--workdir", b.workdir, "Scratch directory for generated code");

  TuneArgs t;
  auto* c_t = app.add_subcommand("tune", "Pick the fastest vpredicated batch size for a model");
  c_t->add_option("--model", t.model, "Model path")->required();
  c_t->add_option("--data", t.data, "Dataset path")->required();
  c_t->add_option("--batches", t.batches, "Comma list of batch sizes")
      ->delimiter(',')
      ->capture_default_str();
  c_t->add_option("--trials", t.trials, "Trials per batch size")->capture_default_str();
  c_t->add_flag("--no-warmup", t.no_warmup, "Skip the untimed warmup pass");
  c_t->add_option("--out", t.out, "Output CSV path (stdout if omitted)");

  CoverageArgs cv;
  auto* c_cv = app.add_subcommand("coverage", "Mean fraction of features each vector touches");
  c_cv->add_option("--model", cv.model, "Model path")->required();
  c_cv->add_option("--data", cv.data, "Dataset path")->required();

  CodegenArgs cg;
  auto* c_cg = app.add_subcommand(
      "codegen",
      "Emit C source for the model. The entry point is\n"
      "  double score_ensemble(const float* x)\n"
      "Compiler: $TREEINFER_CC, else $CC, else cc/gcc/clang on PATH.");
  c_cg->add_option("--model", cg.model, "Model path")->required();
  c_cg->add_option("--out", cg.out, "Output directory")->required();
  c_cg->add_flag("--keep-sources", cg.keep_sources, "Keep the emitted source after --compile");
  c_cg->add_flag("--compile", cg.compile, "Compile, load and verify the emitted code");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (c_gm->parsed()) return run_gen_model(gm);
    if (c_gd->parsed()) return run_gen_data(gd);
    if (c_val->parsed()) return run_validate(validate_path);
    if (c_b->parsed()) return run_bench(b);
    if (c_t->parsed()) return run_tune(t);
    if (c_cv->parsed()) return run_coverage(cv);
    if (c_cg->parsed()) return run_codegen(cg);
  } catch (const ti::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ti::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
