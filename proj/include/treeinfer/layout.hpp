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

// Evaluation strategies behind one Evaluator interface.
//
//   heap_linked     one heap object per node, virtual dispatch per step
//   compact_linked  one individually allocated {fid, theta, left, right}
//                   record per node, pointer chasing
//   contiguous      every tree packed breadth-first in a single array of
//                   records with child indices; no empty slots
//   predicated      complete-tree node tables, branch-free unrolled kernel
//   vpredicated     predicated kernel interleaved across v instances
//   generated       compiled if-else code, see generated.hpp
//
// All strategies narrow thresholds and leaf values to float the same way and
// sum weighted leaf values in tree order into a double, so their scores are
// bit-identical to reference_score().

#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treeinfer/dataset.hpp"
#include "treeinfer/error.hpp"
#include "treeinfer/model.hpp"
#include "treeinfer/predicated.hpp"

namespace treeinfer {

enum class StrategyKind {
  kHeapLinked,
  kCompactLinked,
  kContiguous,
  kPredicated,
  kVPredicated,
  kGenerated,
};

inline constexpr std::array<StrategyKind, 6> kAllStrategies = {
    StrategyKind::kHeapLinked, StrategyKind::kCompactLinked, StrategyKind::kContiguous,
    StrategyKind::kPredicated, StrategyKind::kVPredicated,   StrategyKind::kGenerated,
};

// Largest interleaving width; per-batch scratch lives on the stack.
inline constexpr std::size_t kMaxBatchSize = 1024;

inline std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kHeapLinked: return "heap_linked";
    case StrategyKind::kCompactLinked: return "compact_linked";
    case StrategyKind::kContiguous: return "contiguous";
    case StrategyKind::kPredicated: return "predicated";
    case StrategyKind::kVPredicated: return "vpredicated";
    case StrategyKind::kGenerated: return "generated";
  }
  return "unknown";
}

inline std::optional<StrategyKind> parse_strategy(std::string_view name) {
  for (StrategyKind k : kAllStrategies) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

inline bool is_complete_tree_strategy(StrategyKind kind) {
  return kind == StrategyKind::kPredicated || kind == StrategyKind::kVPredicated;
}

namespace detail {

class EvaluatorImpl {
 public:
  virtual ~EvaluatorImpl() = default;

  virtual double score(const float* x) const = 0;

  virtual void score_rows(const float* rows, std::size_t n, std::size_t stride,
                          double* out) const {
    for (std::size_t i = 0; i < n; ++i) out[i] = score(rows + i * stride);
  }

  // Node records held by the strategy, summed over trees.
  virtual std::size_t stored_nodes() const = 0;
};

// heap_linked --------------------------------------------------------------

class ObjectNode {
 public:
  virtual ~ObjectNode() = default;
  virtual bool is_leaf() const = 0;
  virtual const ObjectNode* child(const float* x) const = 0;
  virtual float value() const = 0;
};

class ObjectLeaf final : public ObjectNode {
 public:
  explicit ObjectLeaf(float value) : value_(value) {}
  bool is_leaf() const override { return true; }
  const ObjectNode* child(const float*) const override { return nullptr; }
  float value() const override { return value_; }

 private:
  float value_;
};

class ObjectSplit final : public ObjectNode {
 public:
  ObjectSplit(std::uint32_t fid, float theta, std::unique_ptr<ObjectNode> left,
              std::unique_ptr<ObjectNode> right)
      : fid_(fid), theta_(theta), left_(std::move(left)), right_(std::move(right)) {}
  bool is_leaf() const override { return false; }
  const ObjectNode* child(const float* x) const override {
    return x[fid_] < theta_ ? left_.get() : right_.get();
  }
  float value() const override { return 0.0f; }

 private:
  std::uint32_t fid_;
  float theta_;
  std::unique_ptr<ObjectNode> left_;
  std::unique_ptr<ObjectNode> right_;
};

class HeapLinkedImpl final : public EvaluatorImpl {
 public:
  explicit HeapLinkedImpl(const Ensemble& e) {
    for (const auto& wt : e.trees()) {
      roots_.push_back(make(wt.tree, 0));
      weights_.push_back(wt.weight);
      nodes_ += wt.tree.node_count();
    }
  }

  double score(const float* x) const override {
    double acc = 0.0;
    for (std::size_t t = 0; t < roots_.size(); ++t) {
      const ObjectNode* n = roots_[t].get();
      while (!n->is_leaf()) n = n->child(x);
      acc += weights_[t] * static_cast<double>(n->value());
    }
    return acc;
  }

  std::size_t stored_nodes() const override { return nodes_; }

 private:
  static std::unique_ptr<ObjectNode> make(const Tree& t, std::uint32_t i) {
    const Node& n = t.node(i);
    if (n.is_leaf()) return std::make_unique<ObjectLeaf>(narrow(n.value));
    auto left = make(t, n.left);
    auto right = make(t, n.right);
    return std::make_unique<ObjectSplit>(n.feature_id, narrow(n.threshold), std::move(left),
                                         std::move(right));
  }

  std::vector<std::unique_ptr<ObjectNode>> roots_;
  std::vector<double> weights_;
  std::size_t nodes_ = 0;
};

// compact_linked -----------------------------------------------------------

// Leaves have left == nullptr and keep their value in theta.
struct CompactNode {
  std::uint32_t fid;
  float theta;
  const CompactNode* left;
  const CompactNode* right;
};

class CompactLinkedImpl final : public EvaluatorImpl {
 public:
  explicit CompactLinkedImpl(const Ensemble& e) {
    for (const auto& wt : e.trees()) {
      roots_.push_back(make(wt.tree, 0));
      weights_.push_back(wt.weight);
    }
  }

  double score(const float* x) const override { return score_inline(x); }

  void score_rows(const float* rows, std::size_t n, std::size_t stride,
                  double* out) const override {
    for (std::size_t i = 0; i < n; ++i) out[i] = score_inline(rows + i * stride);
  }

  std::size_t stored_nodes() const override { return storage_.size(); }

 private:
  double score_inline(const float* x) const {
    double acc = 0.0;
    for (std::size_t t = 0; t < roots_.size(); ++t) {
      const CompactNode* n = roots_[t];
      while (n->left != nullptr) n = x[n->fid] < n->theta ? n->left : n->right;
      acc += weights_[t] * static_cast<double>(n->theta);
    }
    return acc;
  }

  // Depth-first allocation, one heap block per node.
  const CompactNode* make(const Tree& t, std::uint32_t i) {
    const Node& n = t.node(i);
    auto node = std::make_unique<CompactNode>();
    CompactNode* raw = node.get();
    storage_.push_back(std::move(node));
    if (n.is_leaf()) {
      *raw = CompactNode{0, narrow(n.value), nullptr, nullptr};
    } else {
      raw->fid = n.feature_id;
      raw->theta = narrow(n.threshold);
      raw->left = make(t, n.left);
      raw->right = make(t, n.right);
    }
    return raw;
  }

  std::vector<std::unique_ptr<CompactNode>> storage_;
  std::vector<const CompactNode*> roots_;
  std::vector<double> weights_;
};

// contiguous ---------------------------------------------------------------

// All trees share one breadth-first block. Siblings are adjacent in
// breadth-first order, so only the left child is stored, as a pointer into
// the block. Leaves have left == nullptr and keep their value in theta.
struct PackedNode {
  std::uint32_t fid;
  float theta;
  const PackedNode* left;
};

class ContiguousImpl final : public EvaluatorImpl {
 public:
  explicit ContiguousImpl(const Ensemble& e) {
    std::size_t total = 0;
    for (const auto& wt : e.trees()) total += wt.tree.node_count();
    nodes_.resize(total);
    std::size_t base = 0;
    for (const auto& wt : e.trees()) {
      roots_.push_back(nodes_.data() + base);
      weights_.push_back(wt.weight);
      const auto& src = wt.tree.nodes();
      for (std::size_t i = 0; i < src.size(); ++i) {
        const Node& n = src[i];
        if (n.is_leaf()) {
          nodes_[base + i] = {0, narrow(n.value), nullptr};
        } else {
          assert(n.right == n.left + 1);
          nodes_[base + i] = {n.feature_id, narrow(n.threshold), nodes_.data() + base + n.left};
        }
      }
      base += src.size();
    }
  }

  double score(const float* x) const override { return score_inline(x); }

  void score_rows(const float* rows, std::size_t n, std::size_t stride,
                  double* out) const override {
    for (std::size_t i = 0; i < n; ++i) out[i] = score_inline(rows + i * stride);
  }

  std::size_t stored_nodes() const override { return nodes_.size(); }

 private:
  double score_inline(const float* x) const {
    double acc = 0.0;
    for (std::size_t t = 0; t < roots_.size(); ++t) {
      const PackedNode* n = roots_[t];
      while (n->left != nullptr) {
        if (x[n->fid] < n->theta) {
          n = n->left;
        } else {
          n = n->left + 1;
        }
      }
      acc += weights_[t] * static_cast<double>(n->theta);
    }
    return acc;
  }

  // Never resized after construction; the child pointers point into it.
  std::vector<PackedNode> nodes_;
  std::vector<const PackedNode*> roots_;
  std::vector<double> weights_;
};

// predicated / vpredicated -------------------------------------------------

struct PredicatedTree {
  CompleteTree ct;
  double weight;
  kernels::LeafIndexFn<NullObserver> leaf_index;
  kernels::InterleavedFn<NullObserver> interleaved;
};

inline std::uint32_t generic_leaf_index(const PredNode* nd, const float* x, int depth) {
  NullObserver obs;
  return kernels::leaf_index_generic(nd, x, depth, obs);
}

class PredicatedImpl : public EvaluatorImpl {
 public:
  PredicatedImpl(const Ensemble& e, bool generic) : generic_(generic) {
    for (const auto& wt : e.trees()) {
      CompleteTree ct = expand_to_complete(wt.tree);
      const int d = ct.depth;
      trees_.push_back({std::move(ct), wt.weight, kernels::leaf_index_table<NullObserver>()[d],
                        kernels::interleaved_table<NullObserver>()[d]});
    }
  }

  double score(const float* x) const override { return score_inline(x); }

  void score_rows(const float* rows, std::size_t n, std::size_t stride,
                  double* out) const override {
    for (std::size_t i = 0; i < n; ++i) out[i] = score_inline(rows + i * stride);
  }

  std::size_t stored_nodes() const override {
    std::size_t total = 0;
    for (const auto& t : trees_) total += t.ct.nodes.size() + t.ct.leaf_values.size();
    return total;
  }

 protected:
  double score_inline(const float* x) const {
    NullObserver obs;
    double acc = 0.0;
    for (const PredicatedTree& t : trees_) {
      const std::uint32_t i =
          generic_ ? generic_leaf_index(t.ct.nodes.data(), x, t.ct.depth)
                   : t.leaf_index(t.ct.nodes.data(), x, obs);
      acc += t.weight * static_cast<double>(t.ct.leaf_values[i - t.ct.first_leaf_index()]);
    }
    return acc;
  }

  std::vector<PredicatedTree> trees_;
  bool generic_;
};

class VPredicatedImpl final : public PredicatedImpl {
 public:
  VPredicatedImpl(const Ensemble& e, std::size_t v, bool generic)
      : PredicatedImpl(e, generic), v_(v) {
    if (generic) return;
    switch (v) {
      case 1: batches_ = &VPredicatedImpl::score_fixed<1>; break;
      case 2: batches_ = &VPredicatedImpl::score_fixed<2>; break;
      case 4: batches_ = &VPredicatedImpl::score_fixed<4>; break;
      case 8: batches_ = &VPredicatedImpl::score_fixed<8>; break;
      case 16: batches_ = &VPredicatedImpl::score_fixed<16>; break;
      case 32: batches_ = &VPredicatedImpl::score_fixed<32>; break;
      case 64: batches_ = &VPredicatedImpl::score_fixed<64>; break;
      default: break;
    }
    if (batches_ != nullptr) {
      for (const PredicatedTree& t : trees_) {
        fixed_.push_back(kernels::fixed_interleaved<NullObserver>(t.ct.depth, v));
      }
    }
  }

  void score_rows(const float* rows, std::size_t n, std::size_t stride,
                  double* out) const override {
    const std::size_t b = batches_ != nullptr ? (this->*batches_)(rows, n, stride, out)
                                              : score_any(rows, n, stride, out);
    for (std::size_t r = b; r < n; ++r) out[r] = score_inline(rows + r * stride);
  }

 private:
  using BatchFn = std::size_t (VPredicatedImpl::*)(const float*, std::size_t, std::size_t,
                                                   double*) const;

  // Scores whole batches of V rows; returns the number of rows scored.
  template <std::size_t V>
  std::size_t score_fixed(const float* rows, std::size_t n, std::size_t stride,
                          double* out) const {
    std::array<std::uint32_t, V> idx;
    NullObserver obs;
    std::size_t b = 0;
    for (; b + V <= n; b += V) {
      const float* batch = rows + b * stride;
      std::array<double, V> acc{};
      for (std::size_t k = 0; k < trees_.size(); ++k) {
        const PredicatedTree& t = trees_[k];
        fixed_[k](t.ct.nodes.data(), batch, stride, idx.data(), obs);
        const float* leaves = t.ct.leaf_values.data() - t.ct.first_leaf_index();
        for (std::size_t j = 0; j < V; ++j) {
          acc[j] += t.weight * static_cast<double>(leaves[idx[j]]);
        }
      }
      for (std::size_t j = 0; j < V; ++j) out[b + j] = acc[j];
    }
    return b;
  }

  std::size_t score_any(const float* rows, std::size_t n, std::size_t stride,
                        double* out) const {
    std::array<std::uint32_t, kMaxBatchSize> idx;
    std::array<double, kMaxBatchSize> acc;
    NullObserver obs;
    const std::size_t v = v_;
    std::size_t b = 0;
    for (; b + v <= n; b += v) {
      const float* batch = rows + b * stride;
      for (std::size_t j = 0; j < v; ++j) acc[j] = 0.0;
      for (const PredicatedTree& t : trees_) {
        if (generic_) {
          kernels::leaf_indices_interleaved_generic(t.ct.nodes.data(), batch, stride,
                                                    t.ct.depth, v, idx.data(), obs);
        } else {
          t.interleaved(t.ct.nodes.data(), batch, stride, v, idx.data(), obs);
        }
        const float* leaves = t.ct.leaf_values.data() - t.ct.first_leaf_index();
        for (std::size_t j = 0; j < v; ++j) {
          acc[j] += t.weight * static_cast<double>(leaves[idx[j]]);
        }
      }
      for (std::size_t j = 0; j < v; ++j) out[b + j] = acc[j];
    }
    return b;
  }

  std::size_t v_;
  BatchFn batches_ = nullptr;
  std::vector<kernels::InterleavedFixedFn<NullObserver>> fixed_;
};

}  // namespace detail

// An immutable, shareable prediction strategy built from an Ensemble.
class Evaluator {
 public:
  Evaluator(StrategyKind kind, std::size_t num_features, std::size_t batch_size,
            std::shared_ptr<const detail::EvaluatorImpl> impl)
      : kind_(kind), num_features_(num_features), batch_size_(batch_size),
        impl_(std::move(impl)) {}

  StrategyKind kind() const { return kind_; }
  std::size_t num_features() const { return num_features_; }
  // Interleaving width; 1 for every kind except vpredicated.
  std::size_t batch_size() const { return batch_size_; }
  std::size_t stored_nodes() const { return impl_->stored_nodes(); }

  double predict(std::span<const float> x) const {
    check_dimension(x.size());
    return impl_->score(x.data());
  }

  void predict_batch(const Dataset& data, std::span<double> out) const {
    if (data.empty()) return;
    check_dimension(data.num_features());
    if (out.size() != data.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "output span size differs from row count");
    }
    impl_->score_rows(data.data(), data.size(), data.num_features(), out.data());
  }

  std::vector<double> predict_batch(const Dataset& data) const {
    std::vector<double> out(data.size());
    predict_batch(data, out);
    return out;
  }

 private:
  void check_dimension(std::size_t f) const {
    if (f != num_features_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "feature vector has " + std::to_string(f) + " entries, model expects " +
                      std::to_string(num_features_));
    }
  }

  StrategyKind kind_;
  std::size_t num_features_;
  std::size_t batch_size_;
  std::shared_ptr<const detail::EvaluatorImpl> impl_;
};

struct BuildOptions {
  std::optional<std::size_t> batch_size;
  // Use the depth-generic loop kernels instead of the unrolled dispatch table.
  bool generic_kernels = false;
};

inline Evaluator build(const Ensemble& e, StrategyKind kind, const BuildOptions& opts) {
  if (kind == StrategyKind::kGenerated) {
    throw Error(ErrorCode::kUsage, "generated evaluators are built by build_generated()");
  }
  if (opts.batch_size && kind != StrategyKind::kVPredicated) {
    throw Error(ErrorCode::kUsage,
                "batch size given for non-vectorized strategy " + std::string(to_string(kind)));
  }
  if (kind == StrategyKind::kVPredicated) {
    if (!opts.batch_size) throw Error(ErrorCode::kUsage, "vpredicated needs a batch size");
    if (*opts.batch_size < 1 || *opts.batch_size > kMaxBatchSize) {
      throw Error(ErrorCode::kUsage, "batch size must be in [1, " +
                                         std::to_string(kMaxBatchSize) + "]");
    }
  }
  if (is_complete_tree_strategy(kind) && e.max_depth() > kMaxCompleteDepth) {
    throw Error(ErrorCode::kDepthLimit,
                "tree depth " + std::to_string(e.max_depth()) + " exceeds " +
                    std::to_string(kMaxCompleteDepth) + " for " + std::string(to_string(kind)));
  }
  const std::size_t f = e.num_features();
  switch (kind) {
    case StrategyKind::kHeapLinked:
      return Evaluator(kind, f, 1, std::make_shared<detail::HeapLinkedImpl>(e));
    case StrategyKind::kCompactLinked:
      return Evaluator(kind, f, 1, std::make_shared<detail::CompactLinkedImpl>(e));
    case StrategyKind::kContiguous:
      return Evaluator(kind, f, 1, std::make_shared<detail::ContiguousImpl>(e));
    case StrategyKind::kPredicated:
      return Evaluator(kind, f, 1,
                       std::make_shared<detail::PredicatedImpl>(e, opts.generic_kernels));
    case StrategyKind::kVPredicated:
      return Evaluator(kind, f, *opts.batch_size,
                       std::make_shared<detail::VPredicatedImpl>(e, *opts.batch_size,
                                                                 opts.generic_kernels));
    case StrategyKind::kGenerated:
      break;
  }
  throw Error(ErrorCode::kUsage, "unknown strategy");
}

inline Evaluator build(const Ensemble& e, StrategyKind kind,
                       std::optional<std::size_t> batch_size = std::nullopt) {
  return build(e, kind, BuildOptions{batch_size, false});
}

struct TracedPrediction {
  double score = 0.0;
  std::set<std::uint32_t> visited_features;
  // Node index of the leaf reached in each tree, in tree order.
  std::vector<std::uint32_t> visited_leaves;
};

// Walks every tree of the logical ensemble, recording the features examined.
inline TracedPrediction predict_ensemble_traced(const Ensemble& e, std::span<const float> x) {
  if (x.size() != e.num_features()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature vector size differs from model");
  }
  TracedPrediction out;
  out.visited_leaves.reserve(e.size());
  for (const auto& wt : e.trees()) {
    const Tree& t = wt.tree;
    std::uint32_t i = 0;
    while (!t.node(i).is_leaf()) {
      const Node& n = t.node(i);
      out.visited_features.insert(n.feature_id);
      i = x[n.feature_id] < narrow(n.threshold) ? n.left : n.right;
    }
    out.visited_leaves.push_back(i);
    out.score += wt.weight * static_cast<double>(narrow(t.node(i).value));
  }
  return out;
}

}  // namespace treeinfer
