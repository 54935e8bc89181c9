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

// Logical decision trees and ensembles, plus the breadth-first complete-tree
// form consumed by the predicated evaluators.
//
// Decision rule shared by every evaluator: at an internal node the left child
// is taken iff x[feature_id] < threshold, so a value equal to the threshold
// goes right. Thresholds and leaf values are narrowed to 32-bit floats before
// any comparison or accumulation; the logical model keeps the original reals.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treeinfer/error.hpp"

namespace treeinfer {

// Deepest tree accepted by the complete-tree (predicated) strategies. The
// expanded node table of a depth-d tree holds 2^d - 1 entries.
inline constexpr int kMaxCompleteDepth = 16;

// Threshold carried by dummy nodes inserted by expand_to_complete().
inline constexpr float kDummyThreshold = std::numeric_limits<float>::infinity();

inline float narrow(double value) { return static_cast<float>(value); }

// True when the value narrows to a finite 32-bit float.
inline bool fits_float(double value) {
  return std::isfinite(value) && std::isfinite(narrow(value));
}

enum class NodeKind : std::uint8_t { kInternal, kLeaf };

struct Node {
  NodeKind kind = NodeKind::kLeaf;
  std::uint32_t feature_id = 0;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;

  bool is_leaf() const { return kind == NodeKind::kLeaf; }

  static Node make_leaf(double value) {
    Node n;
    n.kind = NodeKind::kLeaf;
    n.value = value;
    return n;
  }

  static Node make_internal(std::uint32_t feature_id, double threshold,
                            std::uint32_t left, std::uint32_t right) {
    Node n;
    n.kind = NodeKind::kInternal;
    n.feature_id = feature_id;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
    return n;
  }

  friend bool operator==(const Node&, const Node&) = default;
};

// An immutable binary decision tree. Nodes are stored in canonical
// breadth-first order: the root is node 0 and children always have larger
// indices than their parent.
class Tree {
 public:
  Tree() : Tree(leaf(0.0)) {}

  static Tree leaf(double value) {
    return from_nodes({Node::make_leaf(value)});
  }

  static Tree split(std::uint32_t feature_id, double threshold,
                    const Tree& left, const Tree& right) {
    std::vector<Node> nodes;
    nodes.reserve(1 + left.node_count() + right.node_count());
    const auto left_offset = static_cast<std::uint32_t>(1);
    const auto right_offset =
        static_cast<std::uint32_t>(1 + left.node_count());
    nodes.push_back(
        Node::make_internal(feature_id, threshold, left_offset, right_offset));
    const std::pair<const Tree*, std::uint32_t> parts[] = {{&left, left_offset},
                                                            {&right, right_offset}};
    for (const auto& [sub, offset] : parts) {
      for (Node n : sub->nodes_) {
        if (!n.is_leaf()) {
          n.left += offset;
          n.right += offset;
        }
        nodes.push_back(n);
      }
    }
    return from_nodes(std::move(nodes));
  }

  // Validates an arbitrary node table rooted at `root` and re-indexes it in
  // breadth-first order. Throws Error(kSemantic) on dangling child ids,
  // cycles or shared subtrees, unreachable nodes, and non-finite values.
  static Tree from_nodes(std::vector<Node> nodes, std::uint32_t root = 0) {
    if (nodes.empty()) {
      throw Error(ErrorCode::kSemantic, "tree has no nodes");
    }
    if (root >= nodes.size()) {
      throw Error(ErrorCode::kSemantic, "root id out of range");
    }
    constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> new_id(nodes.size(), kUnset);
    std::vector<std::uint32_t> order;
    std::vector<int> level;
    order.reserve(nodes.size());
    level.reserve(nodes.size());
    new_id[root] = 0;
    order.push_back(root);
    level.push_back(0);
    for (std::size_t head = 0; head < order.size(); ++head) {
      const Node& n = nodes[order[head]];
      if (n.is_leaf()) {
        if (!fits_float(n.value)) {
          throw Error(ErrorCode::kSemantic,
                      "leaf " + std::to_string(order[head]) +
                          " has a value that is not a finite 32-bit float");
        }
        continue;
      }
      if (!fits_float(n.threshold)) {
        throw Error(ErrorCode::kSemantic,
                    "node " + std::to_string(order[head]) +
                        " has a threshold that is not a finite 32-bit float");
      }
      for (std::uint32_t child : {n.left, n.right}) {
        if (child >= nodes.size()) {
          throw Error(ErrorCode::kSemantic,
                      "dangling child id " + std::to_string(child) +
                          " in node " + std::to_string(order[head]));
        }
        if (new_id[child] != kUnset) {
          throw Error(ErrorCode::kSemantic,
                      "cycle or shared subtree at node " +
                          std::to_string(child));
        }
        new_id[child] = static_cast<std::uint32_t>(order.size());
        order.push_back(child);
        level.push_back(level[head] + 1);
      }
    }
    if (order.size() != nodes.size()) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (new_id[i] == kUnset) {
          throw Error(ErrorCode::kSemantic,
                      "node " + std::to_string(i) + " is unreachable from the root");
        }
      }
    }

    Tree t(PrivateTag{});
    t.nodes_.reserve(nodes.size());
    t.depth_ = 0;
    t.leaf_count_ = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      Node n = nodes[order[k]];
      if (n.is_leaf()) {
        n.feature_id = 0;
        n.threshold = 0.0;
        n.left = n.right = 0;
        ++t.leaf_count_;
        t.depth_ = std::max(t.depth_, level[k]);
      } else {
        n.value = 0.0;
        n.left = new_id[n.left];
        n.right = new_id[n.right];
        t.max_feature_id_ = std::max<std::int64_t>(t.max_feature_id_, n.feature_id);
      }
      t.nodes_.push_back(n);
    }
    return t;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaf_count_; }
  std::size_t internal_count() const { return nodes_.size() - leaf_count_; }

  // Longest root-to-leaf edge count; 0 for a single leaf.
  int depth() const { return depth_; }

  // Number of features the tree reads: max feature id + 1, or 0.
  std::size_t required_features() const {
    return static_cast<std::size_t>(max_feature_id_ + 1);
  }

  // Leaf node indices in left-to-right order. For complete trees position j
  // is the leaf ordinal j.
  std::vector<std::uint32_t> leaves_in_order() const {
    std::vector<std::uint32_t> out;
    out.reserve(leaf_count_);
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
      const std::uint32_t i = stack.back();
      stack.pop_back();
      const Node& n = nodes_[i];
      if (n.is_leaf()) {
        out.push_back(i);
      } else {
        stack.push_back(n.right);
        stack.push_back(n.left);
      }
    }
    return out;
  }

  // Parent index of every node; the root maps to itself.
  std::vector<std::uint32_t> parents() const {
    std::vector<std::uint32_t> parent(nodes_.size(), 0);
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      if (!nodes_[i].is_leaf()) {
        parent[nodes_[i].left] = i;
        parent[nodes_[i].right] = i;
      }
    }
    return parent;
  }

  // Index of the leaf reached by x. x must cover required_features().
  std::uint32_t find_leaf(const float* x) const {
    std::uint32_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const Node& n = nodes_[i];
      i = x[n.feature_id] < narrow(n.threshold) ? n.left : n.right;
    }
    return i;
  }

  float leaf_value(const float* x) const {
    return narrow(nodes_[find_leaf(x)].value);
  }

  friend bool operator==(const Tree& a, const Tree& b) {
    return a.nodes_ == b.nodes_;
  }

 private:
  struct PrivateTag {};
  explicit Tree(PrivateTag) {}

  std::vector<Node> nodes_;
  int depth_ = 0;
  std::size_t leaf_count_ = 0;
  std::int64_t max_feature_id_ = -1;
};

struct WeightedTree {
  Tree tree;
  double weight = 1.0;

  friend bool operator==(const WeightedTree&, const WeightedTree&) = default;
};

// An additive ensemble over a dense feature space of size num_features.
class Ensemble {
 public:
  Ensemble(std::size_t num_features, std::vector<WeightedTree> trees)
      : num_features_(num_features), trees_(std::move(trees)) {
    if (num_features_ == 0) {
      throw Error(ErrorCode::kSemantic, "ensemble needs at least one feature");
    }
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      if (trees_[t].tree.required_features() > num_features_) {
        throw Error(ErrorCode::kSemantic,
                    "tree " + std::to_string(t) + ": feature id out of range (" +
                        std::to_string(trees_[t].tree.required_features() - 1) +
                        " >= " + std::to_string(num_features_) + ")");
      }
      if (!std::isfinite(trees_[t].weight)) {
        throw Error(ErrorCode::kSemantic,
                    "tree " + std::to_string(t) + ": weight is not finite");
      }
    }
  }

  static Ensemble single(std::size_t num_features, Tree tree,
                         double weight = 1.0) {
    std::vector<WeightedTree> trees;
    trees.push_back({std::move(tree), weight});
    return Ensemble(num_features, std::move(trees));
  }

  std::size_t num_features() const { return num_features_; }
  const std::vector<WeightedTree>& trees() const { return trees_; }
  std::size_t size() const { return trees_.size(); }

  int max_depth() const {
    int d = 0;
    for (const auto& t : trees_) d = std::max(d, t.tree.depth());
    return d;
  }

  friend bool operator==(const Ensemble&, const Ensemble&) = default;

 private:
  std::size_t num_features_;
  std::vector<WeightedTree> trees_;
};

// Reference scorer: recursive-equivalent walk of every tree, weighted leaf
// values summed in tree order into a 64-bit accumulator. Every evaluator must
// reproduce this bit for bit.
inline double reference_score(const Ensemble& e, std::span<const float> x) {
  if (x.size() != e.num_features()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature vector has " + std::to_string(x.size()) +
                    " entries, model expects " + std::to_string(e.num_features()));
  }
  double acc = 0.0;
  for (const auto& wt : e.trees()) {
    acc += wt.weight * static_cast<double>(wt.tree.leaf_value(x.data()));
  }
  return acc;
}

struct TreeStats {
  double avg_depth = 0.0;
  double depth_variance = 0.0;
  int max_depth = 0;
  double avg_leaves = 0.0;
};

inline TreeStats tree_stats(const Ensemble& e) {
  TreeStats s;
  if (e.size() == 0) return s;
  const double n = static_cast<double>(e.size());
  for (const auto& wt : e.trees()) {
    s.avg_depth += wt.tree.depth();
    s.avg_leaves += static_cast<double>(wt.tree.leaf_count());
    s.max_depth = std::max(s.max_depth, wt.tree.depth());
  }
  s.avg_depth /= n;
  s.avg_leaves /= n;
  for (const auto& wt : e.trees()) {
    const double dev = wt.tree.depth() - s.avg_depth;
    s.depth_variance += dev * dev;
  }
  s.depth_variance /= n;
  return s;
}

// Predicated node record: feature id and narrowed threshold.
struct PredNode {
  std::uint32_t fid = 0;
  float theta = 0.0f;

  bool is_dummy() const { return theta == kDummyThreshold; }
  friend bool operator==(const PredNode&, const PredNode&) = default;
};

// Fully-branching tree in breadth-first layout: node i has children 2i+1 and
// 2i+2, and leaf ordinal j sits at traversal index 2^depth - 1 + j.
struct CompleteTree {
  int depth = 0;
  std::vector<PredNode> nodes;
  std::vector<float> leaf_values;

  std::uint32_t first_leaf_index() const {
    return (std::uint32_t{1} << depth) - 1;
  }

  static std::uint32_t left_child(std::uint32_t i) { return 2 * i + 1; }
  static std::uint32_t right_child(std::uint32_t i) { return 2 * i + 2; }
  static std::uint32_t parent(std::uint32_t i) { return (i - 1) / 2; }
};

// Expands t into a complete tree of the same depth. A leaf at depth k < d
// becomes a subtree of dummy nodes (fid 0, theta +inf) whose 2^(d-k) leaves
// all carry the original value, so predictions are unchanged.
inline CompleteTree expand_to_complete(const Tree& t,
                                       int max_depth = kMaxCompleteDepth) {
  if (t.depth() > max_depth) {
    throw Error(ErrorCode::kDepthLimit,
                "tree depth " + std::to_string(t.depth()) +
                    " exceeds the complete-tree limit of " +
                    std::to_string(max_depth));
  }
  CompleteTree ct;
  ct.depth = t.depth();
  const std::uint32_t first_leaf = ct.first_leaf_index();
  ct.nodes.assign(first_leaf, PredNode{0, kDummyThreshold});
  ct.leaf_values.assign(std::size_t{1} << ct.depth, 0.0f);

  // (tree node, complete index, level)
  struct Item {
    std::uint32_t node;
    std::uint32_t index;
    int level;
  };
  std::vector<Item> stack{{0, 0, 0}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const Node& n = t.node(it.node);
    if (!n.is_leaf()) {
      ct.nodes[it.index] = PredNode{n.feature_id, narrow(n.threshold)};
      stack.push_back({n.right, CompleteTree::right_child(it.index), it.level + 1});
      stack.push_back({n.left, CompleteTree::left_child(it.index), it.level + 1});
      continue;
    }
    // Descendants of `index` on the leaf level span 2^(d-k) consecutive slots.
    const int span_log = ct.depth - it.level;
    const std::uint32_t start = ((it.index + 1) << span_log) - 1 - first_leaf;
    const std::uint32_t count = std::uint32_t{1} << span_log;
    for (std::uint32_t j = 0; j < count; ++j) {
      ct.leaf_values[start + j] = narrow(n.value);
    }
  }
  return ct;
}

}  // namespace treeinfer
