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

#include "treeinfer/layout.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <numeric>
#include <vector>

#include "test_util.hpp"
#include "treeinfer/synthgen.hpp"

namespace treeinfer {
namespace {

using testing::TestRng;

constexpr StrategyKind kInProcess[] = {StrategyKind::kHeapLinked, StrategyKind::kCompactLinked,
                                       StrategyKind::kContiguous, StrategyKind::kPredicated,
                                       StrategyKind::kVPredicated};

Evaluator make(const Ensemble& e, StrategyKind k, std::size_t v = 16) {
  return k == StrategyKind::kVPredicated ? build(e, k, v) : build(e, k);
}

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

TEST(StrategyKindTest, NamesRoundTrip) {
  for (StrategyKind k : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(k)), k);
  EXPECT_FALSE(parse_strategy("object").has_value());
}

TEST(BuildTest, SingleLeafEveryKind) {
  const Ensemble e = Ensemble::single(3, Tree::leaf(0.75), 2.0);
  const std::vector<float> x{0.1f, 0.2f, 0.3f};
  for (StrategyKind k : kInProcess) {
    EXPECT_EQ(make(e, k).predict(x), 1.5) << to_string(k);
  }
}

TEST(BuildTest, DepthLimitForCompleteTreeKinds) {
  TestRng rng(1);
  const Ensemble ok = Ensemble::single(4, testing::random_tree(rng, 12, 4, 0.0));
  EXPECT_NO_THROW(build(ok, StrategyKind::kPredicated));
  const Ensemble deep = Ensemble::single(4, testing::random_tree(rng, 17, 4, 0.0));
  try {
    build(deep, StrategyKind::kPredicated);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDepthLimit);
  }
  EXPECT_THROW(build(deep, StrategyKind::kVPredicated, 8), Error);
  // Linked layouts have no depth limit.
  std::vector<float> x(4, 0.5f);
  const double want = reference_score(deep, x);
  EXPECT_EQ(build(deep, StrategyKind::kHeapLinked).predict(x), want);
  EXPECT_EQ(build(deep, StrategyKind::kCompactLinked).predict(x), want);
  EXPECT_EQ(build(deep, StrategyKind::kContiguous).predict(x), want);
}

TEST(BuildTest, BatchSizeValidation) {
  const Ensemble e = Ensemble::single(1, Tree::leaf(1.0));
  EXPECT_THROW(build(e, StrategyKind::kPredicated, 8), Error);
  EXPECT_THROW(build(e, StrategyKind::kVPredicated), Error);
  EXPECT_THROW(build(e, StrategyKind::kVPredicated, 0), Error);
  EXPECT_THROW(build(e, StrategyKind::kVPredicated, kMaxBatchSize + 1), Error);
  EXPECT_THROW(build(e, StrategyKind::kGenerated), Error);
  EXPECT_EQ(build(e, StrategyKind::kVPredicated, 32).batch_size(), 32u);
}

TEST(PredictTest, AdditiveEnsemble) {
  const Ensemble e(2, {{Tree::leaf(1.0), 1.0}, {Tree::leaf(2.0), 1.0}});
  const std::vector<float> x{0.0f, 0.0f};
  for (StrategyKind k : kInProcess) EXPECT_EQ(make(e, k).predict(x), 3.0);
}

TEST(PredictTest, ZeroWeightsGiveZero) {
  TestRng rng(2);
  Ensemble base = testing::random_ensemble(rng, 8, 10, 6);
  std::vector<WeightedTree> trees = base.trees();
  for (auto& t : trees) t.weight = 0.0;
  const Ensemble e(8, trees);
  const Dataset data = testing::random_vectors(rng, e, 20);
  for (StrategyKind k : kInProcess) {
    for (double s : make(e, k).predict_batch(data)) EXPECT_EQ(s, 0.0);
  }
}

TEST(PredictTest, DimensionMismatch) {
  const Ensemble e = Ensemble::single(3, Tree::leaf(1.0));
  const std::vector<float> x(2, 0.0f);
  for (StrategyKind k : kInProcess) {
    EXPECT_THROW(make(e, k).predict(x), Error);
    EXPECT_THROW(make(e, k).predict_batch(Dataset(4, 2)), Error);
  }
}

TEST(PredictTest, HeapLinkedEqualsVPredicatedBitExact) {
  GenConfig cfg;
  cfg.depth = 8;
  cfg.num_features = 64;
  cfg.seed = 99;
  const Ensemble e = gen_ensemble(cfg, 20);
  TestRng rng(99);
  const Dataset data = testing::random_vectors(rng, e, 1000);
  const Evaluator slow = build(e, StrategyKind::kHeapLinked);
  const Evaluator fast = build(e, StrategyKind::kVPredicated, 16);
  const auto batched = fast.predict_batch(data);
  for (std::size_t i = 0; i < data.size(); ++i) {
    ASSERT_EQ(bits(slow.predict(data.row(i))), bits(batched[i]));
  }
}

TEST(PredictBatchTest, EmptyDataset) {
  const Ensemble e = Ensemble::single(2, Tree::leaf(1.0));
  for (StrategyKind k : kInProcess) EXPECT_TRUE(make(e, k).predict_batch(Dataset(0, 2)).empty());
}

TEST(PredictBatchTest, RemainderRowsUseScalarPath) {
  TestRng rng(5);
  const Ensemble e = testing::random_ensemble(rng, 6, 5, 7);
  const Dataset data = testing::random_vectors(rng, e, 5);
  const Evaluator ev = build(e, StrategyKind::kVPredicated, 4);
  const auto out = ev.predict_batch(data);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(bits(out[i]), bits(ev.predict(data.row(i))));
}

TEST(PredictBatchTest, AllConfigurationsAgree) {
  TestRng rng(6);
  const Ensemble e = testing::random_ensemble(rng, 128, 30, 11);
  const Dataset data = testing::random_vectors(rng, e, 10000);
  std::vector<double> want(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) want[i] = testing::oracle_score(e, data.row(i).data());
  std::vector<Evaluator> evs;
  for (StrategyKind k : kInProcess) {
    if (k != StrategyKind::kVPredicated) evs.push_back(build(e, k));
  }
  for (std::size_t v : {1u, 8u, 16u, 32u, 64u}) evs.push_back(build(e, StrategyKind::kVPredicated, v));
  for (const Evaluator& ev : evs) {
    const auto got = ev.predict_batch(data);
    for (std::size_t i = 0; i < data.size(); ++i) {
      ASSERT_EQ(bits(got[i]), bits(want[i])) << to_string(ev.kind()) << " v=" << ev.batch_size();
    }
  }
}

TEST(VPredicatedTest, EveryBatchWidthMatchesOracle) {
  TestRng rng(16);
  const Ensemble e = testing::random_ensemble(rng, 32, 12, 9);
  const Dataset data = testing::random_vectors(rng, e, 200);
  std::vector<double> want(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) want[i] = testing::oracle_score(e, data.row(i).data());
  std::vector<std::size_t> widths(70);
  std::iota(widths.begin(), widths.end(), 1);
  widths.push_back(kMaxBatchSize);
  for (std::size_t v : widths) {
    const auto got = build(e, StrategyKind::kVPredicated, v).predict_batch(data);
    for (std::size_t i = 0; i < data.size(); ++i) {
      ASSERT_EQ(bits(got[i]), bits(want[i])) << "v=" << v << " row " << i;
    }
  }
}

TEST(PredictBatchTest, PermutationIndependent) {
  TestRng rng(7);
  const Ensemble e = testing::random_ensemble(rng, 16, 10, 9);
  const Dataset data = testing::random_vectors(rng, e, 333);
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  Dataset shuffled(data.size(), 16);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::copy_n(data.row(perm[i]).data(), 16, shuffled.mutable_row(i).data());
  }
  for (StrategyKind k : kInProcess) {
    const Evaluator ev = make(e, k, 8);
    const auto a = ev.predict_batch(data);
    const auto b = ev.predict_batch(shuffled);
    for (std::size_t i = 0; i < data.size(); ++i) ASSERT_EQ(bits(b[i]), bits(a[perm[i]]));
  }
}

TEST(LayoutTest, ContiguousPacksTightlyPredicatedExpands) {
  const Tree t = Tree::split(0, 0.5, Tree::leaf(7.0),
                             Tree::split(1, 0.3, Tree::leaf(8.0),
                                         Tree::split(2, 0.1, Tree::leaf(9.0), Tree::leaf(1.0))));
  const Ensemble e = Ensemble::single(3, t);
  EXPECT_EQ(build(e, StrategyKind::kContiguous).stored_nodes(), t.node_count());
  EXPECT_EQ(build(e, StrategyKind::kCompactLinked).stored_nodes(), t.node_count());
  EXPECT_EQ(build(e, StrategyKind::kPredicated).stored_nodes(), (2u << t.depth()) - 1);
}

TEST(CrossStrategyTest, RandomEnsemblesMatchOracle) {
  TestRng rng(2718);
  const std::size_t feature_sizes[] = {32, 128, 512};
  for (int k = 0; k < 60; ++k) {
    const Ensemble e = testing::random_ensemble(rng, feature_sizes[k % 3], 50, 11);
    const Dataset data = testing::random_vectors(rng, e, 100);
    for (StrategyKind kind : kInProcess) {
      const auto got = make(e, kind, 1 + rng.below(64)).predict_batch(data);
      for (std::size_t i = 0; i < data.size(); ++i) {
        ASSERT_EQ(bits(got[i]), bits(testing::oracle_score(e, data.row(i).data())))
            << "ensemble " << k << " " << to_string(kind);
      }
    }
  }
}

TEST(CrossStrategyTest, GenericKernelsMatchSpecialized) {
  TestRng rng(31);
  const Ensemble e = testing::random_ensemble(rng, 32, 20, 11);
  const Dataset data = testing::random_vectors(rng, e, 500);
  for (StrategyKind kind : {StrategyKind::kPredicated, StrategyKind::kVPredicated}) {
    const std::optional<std::size_t> v =
        kind == StrategyKind::kVPredicated ? std::optional<std::size_t>(8) : std::nullopt;
    const auto a = build(e, kind, BuildOptions{v, false}).predict_batch(data);
    const auto b = build(e, kind, BuildOptions{v, true}).predict_batch(data);
    for (std::size_t i = 0; i < data.size(); ++i) ASSERT_EQ(bits(a[i]), bits(b[i]));
  }
}

TEST(TracedTest, SingleSplitOnFeature3) {
  const Ensemble e = Ensemble::single(5, Tree::split(3, 0.5, Tree::leaf(1), Tree::leaf(2)));
  const std::vector<float> x{0, 0, 0, 0.7f, 0};
  const auto tr = predict_ensemble_traced(e, x);
  EXPECT_EQ(tr.visited_features, (std::set<std::uint32_t>{3}));
  EXPECT_EQ(tr.visited_leaves, (std::vector<std::uint32_t>{2}));
  EXPECT_EQ(tr.score, 2.0);
}

TEST(TracedTest, SingleLeafVisitsNothing) {
  const Ensemble e = Ensemble::single(5, Tree::leaf(1));
  EXPECT_TRUE(predict_ensemble_traced(e, std::vector<float>(5, 0.0f)).visited_features.empty());
}

TEST(TracedTest, MatchesPathWalkOracle) {
  TestRng rng(17);
  for (int k = 0; k < 50; ++k) {
    const Ensemble e = testing::random_ensemble(rng, 24, 10, 8);
    const Dataset data = testing::random_vectors(rng, e, 20);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto tr = predict_ensemble_traced(e, data.row(i));
      std::set<std::uint32_t> want;
      for (std::size_t t = 0; t < e.size(); ++t) {
        testing::path_features(e.trees()[t].tree, 0, data.row(i).data(), want);
        ASSERT_EQ(tr.visited_leaves[t],
                  testing::recursive_leaf_node(e.trees()[t].tree, 0, data.row(i).data()));
      }
      ASSERT_EQ(tr.visited_features, want);
      ASSERT_EQ(bits(tr.score), bits(testing::oracle_score(e, data.row(i).data())));
    }
  }
}

}  // namespace
}  // namespace treeinfer
