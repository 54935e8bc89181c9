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

// Drives the treeinfer binary through the shell.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "treeinfer.hpp"

namespace treeinfer {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("treeinfer-cli-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with `args` (already shell-safe); stdout lands in out.txt.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" TREEINFER_CLI_PATH
                            "' " + args + " > out.txt 2> err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string file(const std::string& name) const { return read_text_file(dir_ / name); }
  std::string out() const { return file("out.txt"); }

  fs::path dir_;
};

TEST_F(CliTest, GenModelThenValidate) {
  ASSERT_EQ(run("gen-model --depth 3 --features 32 --seed 1 --out m.tree"), 0);
  EXPECT_EQ(run("validate m.tree"), 0);
  const Ensemble e = load_model(dir_ / "m.tree");
  EXPECT_EQ(e.size(), 1u);
  EXPECT_EQ(e.max_depth(), 3);
  EXPECT_EQ(e.num_features(), 32u);
}

TEST_F(CliTest, CommandsAreDeterministic) {
  ASSERT_EQ(run("gen-model --depth 5 --features 16 --trees 4 --seed 9 --out a.tree"), 0);
  ASSERT_EQ(run("gen-model --depth 5 --features 16 --trees 4 --seed 9 --out b.tree"), 0);
  EXPECT_EQ(file("a.tree"), file("b.tree"));
  EXPECT_EQ(load_model(dir_ / "a.tree").size(), 4u);
  ASSERT_EQ(run("gen-data --model a.tree --count 500 --seed 3 --out a.fvec"), 0);
  ASSERT_EQ(run("gen-data --model a.tree --count 500 --seed 3 --out b.fvec"), 0);
  EXPECT_EQ(file("a.fvec"), file("b.fvec"));
  ASSERT_EQ(run("gen-data --model a.tree --count 500 --seed 3 --csv --out a.csv"), 0);
  EXPECT_EQ(load_dataset(dir_ / "a.csv"), load_dataset(dir_ / "a.fvec"));
}

TEST_F(CliTest, VPredicatedNeedsBatch) {
  ASSERT_EQ(run("gen-model --out m.tree"), 0);
  EXPECT_EQ(run("bench --model m.tree --strategy vpredicated"), 1);
  EXPECT_NE(file("err.txt").find("--batch"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("gen-model --depth notanumber"), 1);
  ASSERT_EQ(run("gen-model --out m.tree"), 0);
  EXPECT_EQ(run("bench --model m.tree --strategies bogus"), 1);
  EXPECT_EQ(run("bench --model m.tree --sweep"), 1);
  EXPECT_EQ(run("bench --strategies contiguous"), 1);
}

TEST_F(CliTest, ModelAndDataErrors) {
  write_text_file(dir_ / "bad.tree", "ensemble 3 1\ntree 1\nnode 0 3 0.5 1 1\nleaf 1 0\nend\n");
  EXPECT_EQ(run("validate bad.tree"), 2);
  EXPECT_EQ(run("validate missing.tree"), 2);
  ASSERT_EQ(run("gen-model --features 8 --out m.tree"), 0);
  ASSERT_EQ(run("gen-model --features 9 --out m9.tree"), 0);
  ASSERT_EQ(run("gen-data --model m9.tree --count 100 --out d9.fvec"), 0);
  EXPECT_EQ(run("coverage --model m.tree --data d9.fvec"), 2);
}

TEST_F(CliTest, MissingCompilerIsAnEnvironmentError) {
  ASSERT_EQ(run("gen-model --out m.tree"), 0);
  EXPECT_EQ(run("codegen --model m.tree --out gen --compile", "TREEINFER_CC=/nonexistent/cc"), 3);
  // Emitting source alone needs no compiler.
  EXPECT_EQ(run("codegen --model m.tree --out gen", "TREEINFER_CC=/nonexistent/cc"), 0);
  EXPECT_NE(file("gen/score_ensemble.c").find("double score_ensemble(const float* x)"),
            std::string::npos);
  // Explicitly requested but unavailable: the row is reported and the exit is 3.
  EXPECT_EQ(run("bench --model m.tree --strategies generated,contiguous --trials 2 "
                "--instances 4096 --out r.csv",
                "TREEINFER_CC=/nonexistent/cc"),
            3);
  const BenchReport r = parse_csv(file("r.csv"));
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].status, RowStatus::kUnavailable);
  EXPECT_EQ(r.rows[1].status, RowStatus::kOk);
}

TEST_F(CliTest, EndToEndPipelinePassesGate) {
  ASSERT_EQ(run("gen-model --depth 7 --features 32 --seed 1 --out m.tree"), 0);
  ASSERT_EQ(run("gen-data --model m.tree --count 100000 --seed 2 --out d.fvec"), 0);
  ASSERT_EQ(run("bench --model m.tree --data d.fvec --strategies all --trials 5 --out r.csv"), 0)
      << file("err.txt");
  const BenchReport r = parse_csv(file("r.csv"));
  // Five scalar strategies plus vpredicated at the five default batch sizes.
  ASSERT_EQ(r.rows.size(), 10u);
  const bool has_cc = find_toolchain().has_value();
  for (const auto& row : r.rows) {
    if (row.strategy == StrategyKind::kGenerated && !has_cc) {
      EXPECT_EQ(row.status, RowStatus::kUnavailable);
      continue;
    }
    EXPECT_EQ(row.status, RowStatus::kOk) << to_string(row.strategy);
    EXPECT_EQ(row.elapsed_ns.size(), 5u);
    EXPECT_EQ(row.instances, 100000u);
    EXPECT_EQ(row.depth, 7);
  }
}

TEST_F(CliTest, SweepWritesCsvToStdout) {
  ASSERT_EQ(run("bench --sweep --strategies predicated,vpredicated --batch 4 --depths 2 "
                "--features 8 --trials 2 --instances 4096"),
            0);
  const BenchReport r = parse_csv(out());
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[1].batch, 4u);
}

TEST_F(CliTest, TuneAndCoverage) {
  ASSERT_EQ(run("gen-model --depth 6 --features 64 --out m.tree"), 0);
  ASSERT_EQ(run("gen-data --model m.tree --count 20000 --out d.fvec"), 0);
  ASSERT_EQ(run("tune --model m.tree --data d.fvec --batches 1,8 --trials 2 --out t.csv"), 0);
  const BenchReport r = parse_csv(file("t.csv"));
  ASSERT_EQ(r.rows.size(), 2u);
  bool has_best = false;
  for (const auto& [k, v] : r.metadata) has_best |= k == "best_batch" && (v == "1" || v == "8");
  EXPECT_TRUE(has_best);
  ASSERT_EQ(run("coverage --model m.tree --data d.fvec"), 0);
  // Every path of a single complete depth-6 tree tests six distinct features at most.
  std::istringstream in(out());
  std::string key;
  double frac = -1;
  while (in >> key) {
    if (key == "mean_fraction") in >> frac;
  }
  EXPECT_GT(frac, 0.0);
  EXPECT_LE(frac, 6.0 / 64.0 + 1e-9);
}

TEST_F(CliTest, HelpListsGridDefaults) {
  ASSERT_EQ(run("bench --help"), 0);
  const std::string help = out();
  EXPECT_NE(help.find("3,5,7,9,11"), std::string::npos);
  EXPECT_NE(help.find("32,128,512"), std::string::npos);
  EXPECT_NE(help.find("1,8,16,32,64"), std::string::npos);
  EXPECT_NE(help.find("524288"), std::string::npos);
  for (const char* cmd : {"gen-model", "gen-data", "validate", "tune", "coverage", "codegen"}) {
    EXPECT_EQ(run(std::string(cmd) + " --help"), 0) << cmd;
  }
  ASSERT_EQ(run("codegen --help"), 0);
  EXPECT_NE(out().find("score_ensemble"), std::string::npos);
}

}  // namespace
}  // namespace treeinfer
