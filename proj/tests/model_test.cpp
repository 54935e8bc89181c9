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

#include "treeinfer/model.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <vector>

#include "test_util.hpp"

namespace treeinfer {
namespace {

using testing::TestRng;

Tree complete_depth2() {
  return Tree::split(0, 0.5, Tree::split(1, 0.25, Tree::leaf(1.0), Tree::leaf(2.0)),
                     Tree::split(2, 0.75, Tree::leaf(3.0), Tree::leaf(4.0)));
}

TEST(TreeTest, SingleLeaf) {
  const Tree t = Tree::leaf(0.5);
  EXPECT_EQ(t.depth(), 0);
  EXPECT_EQ(t.leaf_count(), 1u);
  EXPECT_EQ(t.node_count(), 1u);
  EXPECT_EQ(t.required_features(), 0u);
}

TEST(TreeTest, SplitIsBreadthFirst) {
  const Tree t = complete_depth2();
  ASSERT_EQ(t.node_count(), 7u);
  EXPECT_EQ(t.node(0).left, 1u);
  EXPECT_EQ(t.node(0).right, 2u);
  EXPECT_EQ(t.node(1).left, 3u);
  EXPECT_EQ(t.node(2).right, 6u);
  EXPECT_EQ(t.node(3).value, 1.0);
  EXPECT_EQ(t.node(6).value, 4.0);
  EXPECT_EQ(t.depth(), 2);
  EXPECT_EQ(t.required_features(), 3u);
}

TEST(TreeTest, TieGoesRight) {
  const Tree t = Tree::split(0, 0.5, Tree::leaf(-1.0), Tree::leaf(1.0));
  const float below = std::nextafter(0.5f, 0.0f);
  const float at = 0.5f;
  EXPECT_EQ(t.leaf_value(&below), -1.0f);
  EXPECT_EQ(t.leaf_value(&at), 1.0f);
}

TEST(TreeTest, FromNodesRejectsDanglingChild) {
  std::vector<Node> nodes{Node::make_internal(0, 0.5, 1, 7), Node::make_leaf(1.0)};
  try {
    Tree::from_nodes(nodes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSemantic);
    EXPECT_NE(std::string(e.what()).find("dangling"), std::string::npos);
  }
}

TEST(TreeTest, FromNodesRejectsCycle) {
  std::vector<Node> nodes{Node::make_internal(0, 0.5, 1, 2), Node::make_internal(0, 0.2, 0, 2),
                          Node::make_leaf(1.0)};
  EXPECT_THROW(Tree::from_nodes(nodes), Error);
}

TEST(TreeTest, FromNodesRejectsUnreachable) {
  std::vector<Node> nodes{Node::make_leaf(1.0), Node::make_leaf(2.0)};
  EXPECT_THROW(Tree::from_nodes(nodes), Error);
}

TEST(TreeTest, FromNodesRejectsNonFinite) {
  EXPECT_THROW(Tree::leaf(INFINITY), Error);
  EXPECT_THROW(Tree::split(0, NAN, Tree::leaf(0), Tree::leaf(1)), Error);
  // Finite as a double but not as a float.
  EXPECT_THROW(Tree::split(0, 1e300, Tree::leaf(0), Tree::leaf(1)), Error);
}

TEST(TreeTest, FromNodesCanonicalizes) {
  // Root stored last, children out of order.
  std::vector<Node> nodes{Node::make_leaf(2.0), Node::make_leaf(1.0),
                          Node::make_internal(4, 0.5, 1, 0)};
  const Tree t = Tree::from_nodes(nodes, 2);
  EXPECT_EQ(t, Tree::split(4, 0.5, Tree::leaf(1.0), Tree::leaf(2.0)));
}

TEST(EnsembleTest, RejectsFeatureOutOfRange) {
  try {
    Ensemble::single(3, Tree::split(3, 0.5, Tree::leaf(0), Tree::leaf(1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("feature id out of range"), std::string::npos);
  }
  EXPECT_NO_THROW(Ensemble::single(4, Tree::split(3, 0.5, Tree::leaf(0), Tree::leaf(1))));
  EXPECT_THROW(Ensemble(0, {}), Error);
}

TEST(EnsembleTest, ReferenceScoreChecksDimension) {
  const Ensemble e = Ensemble::single(2, Tree::leaf(1.0));
  std::vector<float> x(3, 0.0f);
  EXPECT_THROW(reference_score(e, x), Error);
}

TEST(TreeStatsTest, OneCompleteDepth3Tree) {
  const Tree d2 = complete_depth2();
  const Tree d3 = Tree::split(0, 0.5, d2, d2);
  const TreeStats s = tree_stats(Ensemble::single(4, d3));
  EXPECT_DOUBLE_EQ(s.avg_depth, 3.0);
  EXPECT_DOUBLE_EQ(s.avg_leaves, 8.0);
  EXPECT_EQ(s.max_depth, 3);
}

TEST(TreeStatsTest, TwoTreesDepth2And4) {
  const Tree d2 = complete_depth2();
  const Tree d4 = Tree::split(0, 0.1, Tree::split(0, 0.05, d2, Tree::leaf(0)), Tree::leaf(1));
  const TreeStats s = tree_stats(Ensemble(4, {{d2, 1.0}, {d4, 1.0}}));
  EXPECT_DOUBLE_EQ(s.avg_depth, 3.0);
  EXPECT_EQ(s.max_depth, 4);
  EXPECT_DOUBLE_EQ(s.depth_variance, 1.0);
}

TEST(TreeStatsTest, MatchesRecursiveOracle) {
  TestRng rng(11);
  std::vector<WeightedTree> trees;
  for (int t = 0; t < 50; ++t) {
    trees.push_back({testing::random_tree(rng, static_cast<int>(rng.below(12)), 16), 1.0});
  }
  const Ensemble e(16, trees);
  double depth_sum = 0.0;
  double leaf_sum = 0.0;
  int max_depth = 0;
  for (const auto& wt : trees) {
    const int d = testing::recursive_depth(wt.tree, 0);
    EXPECT_EQ(wt.tree.depth(), d);
    depth_sum += d;
    leaf_sum += static_cast<double>(testing::recursive_leaves(wt.tree, 0));
    max_depth = std::max(max_depth, d);
  }
  const TreeStats s = tree_stats(e);
  EXPECT_DOUBLE_EQ(s.avg_depth, depth_sum / 50.0);
  EXPECT_DOUBLE_EQ(s.avg_leaves, leaf_sum / 50.0);
  EXPECT_EQ(s.max_depth, max_depth);
}

TEST(CompleteTreeTest, IndexAlgebra) {
  for (int d = 1; d <= kMaxCompleteDepth; ++d) {
    const std::uint32_t internal = (1u << d) - 1;
    for (std::uint32_t i = 0; i < internal; ++i) {
      ASSERT_EQ(CompleteTree::parent(CompleteTree::left_child(i)), i);
      ASSERT_EQ(CompleteTree::parent(CompleteTree::right_child(i)), i);
    }
  }
}

TEST(ExpandTest, CompleteTreeIsFixedPoint) {
  const CompleteTree ct = expand_to_complete(complete_depth2());
  EXPECT_EQ(ct.depth, 2);
  ASSERT_EQ(ct.nodes.size(), 3u);
  ASSERT_EQ(ct.leaf_values.size(), 4u);
  EXPECT_EQ(ct.nodes[0], (PredNode{0, 0.5f}));
  EXPECT_EQ(ct.nodes[1], (PredNode{1, 0.25f}));
  EXPECT_EQ(ct.nodes[2], (PredNode{2, 0.75f}));
  EXPECT_EQ(ct.leaf_values, (std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f}));
  for (const auto& n : ct.nodes) EXPECT_FALSE(n.is_dummy());
}

TEST(ExpandTest, SingleLeaf) {
  const CompleteTree ct = expand_to_complete(Tree::leaf(1.25));
  EXPECT_EQ(ct.depth, 0);
  EXPECT_TRUE(ct.nodes.empty());
  EXPECT_EQ(ct.leaf_values, std::vector<float>{1.25f});
}

TEST(ExpandTest, UnbalancedThreeLeafTree) {
  // Left child is a leaf at depth 1; right subtree splits on feature 1.
  const Tree t = Tree::split(0, 0.5, Tree::leaf(7.0),
                             Tree::split(1, 0.3, Tree::leaf(8.0), Tree::leaf(9.0)));
  const CompleteTree ct = expand_to_complete(t);
  EXPECT_EQ(ct.depth, 2);
  ASSERT_EQ(ct.nodes.size(), 3u);
  EXPECT_TRUE(ct.nodes[1].is_dummy());
  EXPECT_EQ(ct.nodes[1].fid, 0u);
  EXPECT_EQ(ct.leaf_values, (std::vector<float>{7.0f, 7.0f, 8.0f, 9.0f}));
  // One probe per constraint-satisfying path (2^d of them, ties included).
  const std::vector<std::vector<float>> probes{
      {0.1f, 0.0f}, {0.1f, 0.9f}, {0.5f, 0.1f}, {0.5f, 0.3f}};
  for (const auto& x : probes) {
    EXPECT_EQ(ct.leaf_values[testing::branchy_leaf_ordinal(ct, x.data())],
              testing::recursive_leaf_value(t, 0, x.data()));
  }
}

TEST(ExpandTest, DepthLimit) {
  TestRng rng(5);
  const Tree deep = testing::random_tree(rng, kMaxCompleteDepth + 1, 4, 0.0);
  try {
    expand_to_complete(deep);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDepthLimit);
  }
  const Tree ok = testing::random_tree(rng, kMaxCompleteDepth, 4, 0.0);
  EXPECT_EQ(expand_to_complete(ok).nodes.size(), (1u << kMaxCompleteDepth) - 1);
}

TEST(ExpandTest, PreservesPredictionsOnRandomPairs) {
  TestRng rng(2024);
  for (int pair = 0; pair < 1000; ++pair) {
    const int d = static_cast<int>(rng.below(12));
    const Tree t = testing::random_tree(rng, d, 8, 0.5);
    const CompleteTree ct = expand_to_complete(t);
    ASSERT_EQ(ct.nodes.size() + ct.leaf_values.size(), (std::size_t{2} << d) - 1);
    std::vector<float> x(8);
    for (float& v : x) v = rng.unit_float();
    const float want = testing::recursive_leaf_value(t, 0, x.data());
    const float got = ct.leaf_values[testing::branchy_leaf_ordinal(ct, x.data())];
    ASSERT_EQ(std::bit_cast<std::uint32_t>(want), std::bit_cast<std::uint32_t>(got));
  }
}

}  // namespace
}  // namespace treeinfer
