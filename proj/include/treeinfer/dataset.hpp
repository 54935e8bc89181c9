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

// Dense row-major feature matrices and their on-disk formats.
//
// FVEC binary layout: "FVEC", u32 count, u32 num_features, then
// count * num_features float32 values, row-major, all little-endian.

#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treeinfer/error.hpp"
#include "treeinfer/model_io.hpp"

namespace treeinfer {

class Dataset {
 public:
  Dataset() = default;

  // Zero-filled n x f matrix.
  Dataset(std::size_t count, std::size_t num_features)
      : count_(count), num_features_(num_features), values_(count * num_features, 0.0f) {}

  // Takes ownership of a packed row-major matrix; every value must be finite.
  Dataset(std::size_t num_features, std::vector<float> values)
      : num_features_(num_features), values_(std::move(values)) {
    if (num_features_ == 0) {
      if (!values_.empty()) {
        throw Error(ErrorCode::kDimensionMismatch, "values given for zero features");
      }
      return;
    }
    if (values_.size() % num_features_ != 0) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "value count is not a multiple of the feature count");
    }
    count_ = values_.size() / num_features_;
    for (float v : values_) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kSemantic, "dataset contains a non-finite value");
      }
    }
  }

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::size_t num_features() const { return num_features_; }

  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * num_features_, num_features_};
  }
  std::span<float> mutable_row(std::size_t i) {
    return {values_.data() + i * num_features_, num_features_};
  }

  const float* data() const { return values_.data(); }
  const std::vector<float>& values() const { return values_; }

  // First n rows (or all when n >= size()).
  Dataset prefix(std::size_t n) const {
    n = std::min(n, count_);
    return Dataset(num_features_,
                   std::vector<float>(values_.begin(),
                                      values_.begin() + static_cast<std::ptrdiff_t>(n * num_features_)));
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t count_ = 0;
  std::size_t num_features_ = 0;
  std::vector<float> values_;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace detail

inline std::string encode_fvec(const Dataset& d) {
  if (d.size() > 0xffffffffu || d.num_features() > 0xffffffffu) {
    throw Error(ErrorCode::kIo, "dataset too large for FVEC");
  }
  std::string out = "FVEC";
  out.reserve(12 + d.values().size() * 4);
  detail::put_u32(out, static_cast<std::uint32_t>(d.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(d.num_features()));
  for (float v : d.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline Dataset decode_fvec(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "FVEC") {
    throw Error(ErrorCode::kIo, "not an FVEC document (bad magic)");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t count = detail::get_u32(p + 4);
  const std::uint64_t f = detail::get_u32(p + 8);
  if (bytes.size() != 12 + count * f * 4) {
    throw Error(ErrorCode::kIo, "FVEC payload size does not match its header");
  }
  if (f == 0 && count > 0) throw Error(ErrorCode::kIo, "FVEC rows with zero features");
  std::vector<float> values(count * f);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(detail::get_u32(p + 12 + 4 * i));
  }
  return Dataset(static_cast<std::size_t>(f), std::move(values));
}

// One row per line, comma-separated. Shortest round-trip formatting.
inline std::string encode_csv(const Dataset& d) {
  std::string out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = d.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out.push_back(',');
      out += detail::format_shortest(r[j]);
    }
    out.push_back('\n');
  }
  return out;
}

inline Dataset decode_csv(std::string_view text) {
  std::vector<float> values;
  std::size_t f = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    for (;;) {
      std::size_t comma = line.find(',', start);
      std::string_view field =
          line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                             : comma - start);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw ParseError(line_no, start + 1,
                         "expected a finite number, got '" + std::string(field) + "'");
      }
      values.push_back(v);
      ++fields;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f == 0) {
      f = fields;
    } else if (fields != f) {
      throw ParseError(line_no, 1,
                       "row has " + std::to_string(fields) + " fields, expected " +
                           std::to_string(f));
    }
  }
  return Dataset(f, std::move(values));
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() >= 4 && std::string_view(bytes).substr(0, 4) == "FVEC") {
    return decode_fvec(bytes);
  }
  return decode_csv(bytes);
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& d, bool csv = false) {
  write_text_file(path, csv ? encode_csv(d) : encode_fvec(d));
}

}  // namespace treeinfer
