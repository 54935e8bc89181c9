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

// Seeded synthetic workloads: fully balanced random trees and feature vectors
// that reach every leaf equally often.
//
// Thresholds are drawn strictly inside the feasible interval of their feature
// along the current path, so every leaf stays reachable even when a feature
// repeats on a path. Vector i is built for leaf (i mod 2^d); rows are then
// placed through a seeded uniform permutation.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "treeinfer/dataset.hpp"
#include "treeinfer/error.hpp"
#include "treeinfer/model.hpp"

namespace treeinfer {

struct GenConfig {
  int depth = 3;
  std::size_t num_features = 32;
  std::size_t num_vectors = 0;
  std::uint64_t seed = 1;
  float domain_lo = 0.0f;
  float domain_hi = 1.0f;

  void validate() const {
    if (depth < 0 || depth > 30) throw Error(ErrorCode::kUsage, "depth must be in [0, 30]");
    if (num_features == 0) throw Error(ErrorCode::kUsage, "num_features must be positive");
    if (!(domain_lo < domain_hi) || !std::isfinite(domain_lo) || !std::isfinite(domain_hi)) {
      throw Error(ErrorCode::kUsage, "value domain must be a non-empty finite interval");
    }
  }
};

// Per-feature feasible half-open interval [lo, hi).
struct Interval {
  float lo;
  float hi;
};

// Deterministic generator helpers; the mapping from engine output to values
// is fixed here rather than left to std distributions.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  // Uniform float in [0, 1) on the 2^-24 grid.
  float unit() { return static_cast<float>(engine_() >> 40) * 0x1p-24f; }

  // Uniform float in [lo, hi).
  float uniform(float lo, float hi) {
    float v = lo + (hi - lo) * unit();
    if (v >= hi) v = std::nextafter(hi, lo);
    if (v < lo) v = lo;
    return v;
  }

  // Uniform float strictly inside (lo, hi); requires at least one float there.
  float interior(float lo, float hi) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      const float v = lo + (hi - lo) * unit();
      if (v > lo && v < hi) return v;
    }
    return std::nextafter(lo, hi);
  }

 private:
  std::mt19937_64 engine_;
};

namespace detail {

// Splitting narrower intervals than this risks children without room for
// further thresholds at float precision.
inline float min_split_width(const GenConfig& cfg) {
  const float magnitude = std::max(std::fabs(cfg.domain_lo), std::fabs(cfg.domain_hi));
  const float ulp = std::nextafter(magnitude, std::numeric_limits<float>::infinity()) - magnitude;
  return std::max((cfg.domain_hi - cfg.domain_lo) * 0x1p-20f, 64.0f * ulp);
}

class TreeSynth {
 public:
  TreeSynth(const GenConfig& cfg, SynthRng& rng)
      : cfg_(cfg), rng_(rng), min_width_(min_split_width(cfg)),
        intervals_(cfg.num_features, Interval{cfg.domain_lo, cfg.domain_hi}) {}

  Tree run() {
    const std::size_t count = (std::size_t{2} << cfg_.depth) - 1;
    nodes_.assign(count, Node{});
    grow(0, 0);
    return Tree::from_nodes(std::move(nodes_));
  }

 private:
  std::uint32_t pick_feature() {
    const auto f = cfg_.num_features;
    for (std::size_t attempt = 0; attempt < f; ++attempt) {
      const auto fid = static_cast<std::uint32_t>(rng_.index(f));
      if (intervals_[fid].hi - intervals_[fid].lo >= min_width_) return fid;
    }
    std::uint32_t best = 0;
    for (std::uint32_t j = 1; j < f; ++j) {
      if (intervals_[j].hi - intervals_[j].lo > intervals_[best].hi - intervals_[best].lo) {
        best = j;
      }
    }
    return best;
  }

  // Preorder generation into breadth-first slots: node i at level k.
  void grow(std::uint32_t i, int level) {
    if (level == cfg_.depth) {
      nodes_[i] = Node::make_leaf(rng_.uniform(cfg_.domain_lo, cfg_.domain_hi));
      return;
    }
    const std::uint32_t fid = pick_feature();
    const Interval saved = intervals_[fid];
    // Every feature is nearly exhausted on this path: split down the middle
    // to keep both children as wide as possible.
    const float theta = saved.hi - saved.lo >= min_width_
                            ? rng_.interior(saved.lo, saved.hi)
                            : saved.lo + (saved.hi - saved.lo) * 0.5f;
    nodes_[i] = Node::make_internal(fid, theta, 2 * i + 1, 2 * i + 2);
    intervals_[fid].hi = theta;
    grow(2 * i + 1, level + 1);
    intervals_[fid] = Interval{theta, saved.hi};
    grow(2 * i + 2, level + 1);
    intervals_[fid] = saved;
  }

  const GenConfig& cfg_;
  SynthRng& rng_;
  float min_width_;
  std::vector<Interval> intervals_;
  std::vector<Node> nodes_;
};

struct Constraint {
  std::uint32_t fid;
  Interval range;
};

// Intersected feature constraints along the path to every leaf, in
// left-to-right leaf order.
inline std::vector<std::vector<Constraint>> leaf_constraints(const Tree& t, const GenConfig& cfg) {
  const auto leaves = t.leaves_in_order();
  const auto parent = t.parents();
  std::vector<std::vector<Constraint>> out;
  out.reserve(leaves.size());
  for (std::size_t ord = 0; ord < leaves.size(); ++ord) {
    std::vector<Constraint> cs;
    std::uint32_t child = leaves[ord];
    while (child != 0) {
      const std::uint32_t p = parent[child];
      const Node& n = t.node(p);
      Constraint* c = nullptr;
      for (auto& existing : cs) {
        if (existing.fid == n.feature_id) c = &existing;
      }
      if (c == nullptr) {
        cs.push_back({n.feature_id, {cfg.domain_lo, cfg.domain_hi}});
        c = &cs.back();
      }
      const float theta = narrow(n.threshold);
      if (child == n.left) {
        c->range.hi = std::min(c->range.hi, theta);
      } else {
        c->range.lo = std::max(c->range.lo, theta);
      }
      child = p;
    }
    for (const auto& c : cs) {
      if (!(c.range.lo < c.range.hi)) {
        throw Error(ErrorCode::kUnreachableLeaf,
                    "leaf " + std::to_string(ord) + " is unreachable inside the value domain "
                    "(contradictory predicates on feature " + std::to_string(c.fid) + ")");
      }
    }
    out.push_back(std::move(cs));
  }
  return out;
}

}  // namespace detail

// Fully balanced random tree of depth cfg.depth; leaf values uniform in the
// domain.
inline Tree gen_tree(const GenConfig& cfg) {
  cfg.validate();
  SynthRng rng(cfg.seed);
  return detail::TreeSynth(cfg, rng).run();
}

// Derives independent per-item seeds from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline Ensemble gen_ensemble(const GenConfig& cfg, std::size_t num_trees) {
  std::vector<WeightedTree> trees;
  trees.reserve(num_trees);
  for (std::size_t t = 0; t < num_trees; ++t) {
    GenConfig c = cfg;
    c.seed = derive_seed(cfg.seed, t);
    trees.push_back({gen_tree(c), 1.0});
  }
  return Ensemble(cfg.num_features, std::move(trees));
}

struct LeafUniformSample {
  Dataset data;
  // Leaf ordinal (left-to-right) each row was constructed to reach.
  std::vector<std::uint32_t> target_leaf;
};

inline LeafUniformSample gen_leaf_uniform_sample(const Tree& t, const GenConfig& cfg) {
  cfg.validate();
  if (t.required_features() > cfg.num_features) {
    throw Error(ErrorCode::kDimensionMismatch, "tree reads features beyond num_features");
  }
  const auto constraints = detail::leaf_constraints(t, cfg);
  const std::size_t n = cfg.num_vectors;
  const std::size_t f = cfg.num_features;
  SynthRng rng(derive_seed(cfg.seed, 0x5eedda7a));

  // Seeded uniform permutation: row built i-th lands at position perm[i].
  std::vector<std::uint32_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.index(i)]);
  }

  LeafUniformSample out{Dataset(n, f), std::vector<std::uint32_t>(n)};
  const std::size_t leaves = constraints.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto leaf = static_cast<std::uint32_t>(i % leaves);
    auto row = out.data.mutable_row(perm[i]);
    for (std::size_t j = 0; j < f; ++j) row[j] = rng.uniform(cfg.domain_lo, cfg.domain_hi);
    for (const auto& c : constraints[leaf]) row[c.fid] = rng.uniform(c.range.lo, c.range.hi);
    out.target_leaf[perm[i]] = leaf;
  }
  return out;
}

inline Dataset gen_leaf_uniform_vectors(const Tree& t, const GenConfig& cfg) {
  return gen_leaf_uniform_sample(t, cfg).data;
}

// Uniform random vectors with no leaf targeting.
inline Dataset gen_uniform_vectors(const GenConfig& cfg) {
  cfg.validate();
  SynthRng rng(derive_seed(cfg.seed, 0xda7a));
  Dataset d(cfg.num_vectors, cfg.num_features);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (float& v : d.mutable_row(i)) v = rng.uniform(cfg.domain_lo, cfg.domain_hi);
  }
  return d;
}

}  // namespace treeinfer
