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

// Branch-free traversal kernels over CompleteTree node tables.
//
// Each step computes i = 2i + 1 + (x[nd[i].fid] >= nd[i].theta). After d
// steps i is a leaf traversal index in [2^d - 1, 2^(d+1) - 1). Kernels are
// unrolled per depth at compile time and selected through a dispatch table
// built once; the interleaved variant advances v cursors one level at a time.
//
// Kernels take an observer that is called with every node index visited,
// including the final leaf index. NullObserver compiles away; the recording
// observers exist for tests that compare visit sequences.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "treeinfer/model.hpp"

namespace treeinfer {

struct NullObserver {
  void operator()(std::size_t /*instance*/, std::uint32_t /*index*/) const {}
};

// Per-instance node visit sequences.
struct RecordingObserver {
  std::vector<std::vector<std::uint32_t>> visits;

  explicit RecordingObserver(std::size_t instances = 1) : visits(instances) {}
  void operator()(std::size_t instance, std::uint32_t index) {
    visits[instance].push_back(index);
  }
};

namespace kernels {

inline std::uint32_t step(const PredNode* nd, const float* x, std::uint32_t i) {
  return (i << 1) + 1 + static_cast<std::uint32_t>(x[nd[i].fid] >= nd[i].theta);
}

// Depth-specialized, fully unrolled single-instance traversal. Returns the
// leaf traversal index.
template <int Depth, typename Observer>
std::uint32_t leaf_index_unrolled(const PredNode* nd, const float* x, Observer& obs) {
  std::uint32_t i = 0;
  [&]<std::size_t... L>(std::index_sequence<L...>) {
    ((obs(0, i), i = step(nd, x, i), static_cast<void>(L)), ...);
  }(std::make_index_sequence<Depth>{});
  obs(0, i);
  return i;
}

template <typename Observer>
std::uint32_t leaf_index_generic(const PredNode* nd, const float* x, int depth,
                                 Observer& obs) {
  std::uint32_t i = 0;
  for (int k = 0; k < depth; ++k) {
    obs(0, i);
    i = step(nd, x, i);
  }
  obs(0, i);
  return i;
}

// Interleaved traversal of v instances: rows[j * stride] is instance j; out
// receives v leaf traversal indices. One block of v updates per tree level.
template <int Depth, typename Observer>
void leaf_indices_interleaved(const PredNode* nd, const float* rows, std::size_t stride,
                              std::size_t v, std::uint32_t* out, Observer& obs) {
  for (std::size_t j = 0; j < v; ++j) out[j] = 0;
  [&]<std::size_t... L>(std::index_sequence<L...>) {
    (
        [&] {
          static_cast<void>(L);
          for (std::size_t j = 0; j < v; ++j) {
            obs(j, out[j]);
            out[j] = step(nd, rows + j * stride, out[j]);
          }
        }(),
        ...);
  }(std::make_index_sequence<Depth>{});
  for (std::size_t j = 0; j < v; ++j) obs(j, out[j]);
}

// Same traversal with the batch width fixed at compile time, so the v
// cursors live in registers instead of round-tripping through memory.
template <int Depth, std::size_t V, typename Observer>
void leaf_indices_interleaved_fixed(const PredNode* nd, const float* rows, std::size_t stride,
                                    std::uint32_t* out, Observer& obs) {
  std::array<std::uint32_t, V> idx{};
  [&]<std::size_t... L>(std::index_sequence<L...>) {
    (
        [&] {
          static_cast<void>(L);
#pragma GCC unroll 64
          for (std::size_t j = 0; j < V; ++j) {
            obs(j, idx[j]);
            idx[j] = step(nd, rows + j * stride, idx[j]);
          }
        }(),
        ...);
  }(std::make_index_sequence<Depth>{});
  for (std::size_t j = 0; j < V; ++j) {
    obs(j, idx[j]);
    out[j] = idx[j];
  }
}

template <typename Observer>
void leaf_indices_interleaved_generic(const PredNode* nd, const float* rows,
                                      std::size_t stride, int depth, std::size_t v,
                                      std::uint32_t* out, Observer& obs) {
  for (std::size_t j = 0; j < v; ++j) out[j] = 0;
  for (int k = 0; k < depth; ++k) {
    for (std::size_t j = 0; j < v; ++j) {
      obs(j, out[j]);
      out[j] = step(nd, rows + j * stride, out[j]);
    }
  }
  for (std::size_t j = 0; j < v; ++j) obs(j, out[j]);
}

template <typename Observer>
using LeafIndexFn = std::uint32_t (*)(const PredNode*, const float*, Observer&);

template <typename Observer>
using InterleavedFn = void (*)(const PredNode*, const float*, std::size_t, std::size_t,
                               std::uint32_t*, Observer&);

// Dispatch tables indexed by depth 0..kMaxCompleteDepth.
template <typename Observer>
const std::array<LeafIndexFn<Observer>, kMaxCompleteDepth + 1>& leaf_index_table() {
  static const auto table = []<std::size_t... D>(std::index_sequence<D...>) {
    return std::array<LeafIndexFn<Observer>, kMaxCompleteDepth + 1>{
        &leaf_index_unrolled<static_cast<int>(D), Observer>...};
  }(std::make_index_sequence<kMaxCompleteDepth + 1>{});
  return table;
}

template <typename Observer>
const std::array<InterleavedFn<Observer>, kMaxCompleteDepth + 1>& interleaved_table() {
  static const auto table = []<std::size_t... D>(std::index_sequence<D...>) {
    return std::array<InterleavedFn<Observer>, kMaxCompleteDepth + 1>{
        &leaf_indices_interleaved<static_cast<int>(D), Observer>...};
  }(std::make_index_sequence<kMaxCompleteDepth + 1>{});
  return table;
}

// Batch widths with a compile-time kernel; other widths use the loop kernel.
inline constexpr std::array<std::size_t, 7> kFixedBatchSizes{1, 2, 4, 8, 16, 32, 64};

template <typename Observer>
using InterleavedFixedFn = void (*)(const PredNode*, const float*, std::size_t, std::uint32_t*,
                                    Observer&);

template <std::size_t V, typename Observer>
const std::array<InterleavedFixedFn<Observer>, kMaxCompleteDepth + 1>& fixed_table() {
  static const auto table = []<std::size_t... D>(std::index_sequence<D...>) {
    return std::array<InterleavedFixedFn<Observer>, kMaxCompleteDepth + 1>{
        &leaf_indices_interleaved_fixed<static_cast<int>(D), V, Observer>...};
  }(std::make_index_sequence<kMaxCompleteDepth + 1>{});
  return table;
}

// Fixed-width kernel for (depth, v), or nullptr if v has none.
template <typename Observer>
InterleavedFixedFn<Observer> fixed_interleaved(int depth, std::size_t v) {
  switch (v) {
    case 1: return fixed_table<1, Observer>()[depth];
    case 2: return fixed_table<2, Observer>()[depth];
    case 4: return fixed_table<4, Observer>()[depth];
    case 8: return fixed_table<8, Observer>()[depth];
    case 16: return fixed_table<16, Observer>()[depth];
    case 32: return fixed_table<32, Observer>()[depth];
    case 64: return fixed_table<64, Observer>()[depth];
    default: return nullptr;
  }
}

}  // namespace kernels

// Leaf ordinal reached by x in ct, in [0, 2^depth).
inline std::uint32_t leaf_index_predicated(const CompleteTree& ct, std::span<const float> x) {
  NullObserver obs;
  return kernels::leaf_index_table<NullObserver>()[ct.depth](ct.nodes.data(), x.data(), obs) -
         ct.first_leaf_index();
}

// Node indices visited by the single-instance kernel, root to leaf.
inline std::vector<std::uint32_t> trace_predicated(const CompleteTree& ct,
                                                   std::span<const float> x) {
  RecordingObserver obs(1);
  kernels::leaf_index_table<RecordingObserver>()[ct.depth](ct.nodes.data(), x.data(), obs);
  return std::move(obs.visits[0]);
}

// Node indices visited per instance by the interleaved kernel over `count`
// rows of `stride` floats, processed in batches of v with the remainder going
// through the single-instance kernel, mirroring the vectorized evaluator.
inline std::vector<std::vector<std::uint32_t>> trace_interleaved(const CompleteTree& ct,
                                                                 const float* rows,
                                                                 std::size_t count,
                                                                 std::size_t stride,
                                                                 std::size_t v) {
  std::vector<std::vector<std::uint32_t>> out;
  out.reserve(count);
  std::vector<std::uint32_t> idx(v);
  std::size_t b = 0;
  const auto fixed = kernels::fixed_interleaved<RecordingObserver>(ct.depth, v);
  for (; v > 0 && b + v <= count; b += v) {
    RecordingObserver obs(v);
    if (fixed != nullptr) {
      fixed(ct.nodes.data(), rows + b * stride, stride, idx.data(), obs);
    } else {
      kernels::interleaved_table<RecordingObserver>()[ct.depth](
          ct.nodes.data(), rows + b * stride, stride, v, idx.data(), obs);
    }
    for (auto& seq : obs.visits) out.push_back(std::move(seq));
  }
  for (; b < count; ++b) {
    out.push_back(trace_predicated(ct, {rows + b * stride, stride}));
  }
  return out;
}

}  // namespace treeinfer
