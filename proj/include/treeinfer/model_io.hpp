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

// Text model format:
//
//   ensemble <num_features> <num_trees>
//   tree <weight>
//   node <id> <fid> <theta> <left> <right>
//   leaf <id> <value>
//   end
//
// Lines whose first non-blank character is '#' are comments. Node ids are
// local to a tree block, must be dense in [0, node_count), and id 0 is the
// root. serialize_model() writes the canonical form: breadth-first ids,
// shortest round-trip float formatting, no comments.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "treeinfer/error.hpp"
#include "treeinfer/model.hpp"

namespace treeinfer {

namespace detail {

// Shortest decimal text that parses back to exactly `value`.
inline std::string format_shortest(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::string format_shortest(float value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

template <typename T>
T parse_number(const Token& tok, std::size_t line, const char* what) {
  T value{};
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  if (!tok.text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line, tok.column,
                     std::string("expected ") + what + ", got '" +
                         std::string(tok.text) + "'");
  }
  return value;
}

class ModelParser {
 public:
  explicit ModelParser(std::string_view text) : text_(text) {}

  Ensemble parse() {
    std::vector<Token> toks = next_line();
    if (toks.empty()) throw ParseError(line_no_, 1, "empty document");
    expect_keyword(toks, "ensemble", 3);
    const auto f = parse_number<std::int64_t>(toks[1], line_no_, "feature count");
    const auto count = parse_number<std::int64_t>(toks[2], line_no_, "tree count");
    if (f <= 0) {
      throw Error(ErrorCode::kSemantic,
                  "line " + std::to_string(line_no_) + ": feature count must be positive");
    }
    if (count < 0) {
      throw Error(ErrorCode::kSemantic,
                  "line " + std::to_string(line_no_) + ": negative tree count");
    }
    num_features_ = static_cast<std::uint64_t>(f);

    std::vector<WeightedTree> trees;
    trees.reserve(static_cast<std::size_t>(count));
    for (std::int64_t t = 0; t < count; ++t) trees.push_back(parse_tree(t));

    toks = next_line();
    if (!toks.empty()) {
      throw ParseError(line_no_, toks[0].column,
                       "unexpected content after the last tree block");
    }
    return Ensemble(static_cast<std::size_t>(num_features_), std::move(trees));
  }

 private:
  WeightedTree parse_tree(std::int64_t index) {
    std::vector<Token> toks = next_line();
    if (toks.empty()) {
      throw ParseError(line_no_ + 1, 1,
                       "expected 'tree' block " + std::to_string(index) +
                           ", document ended");
    }
    expect_keyword(toks, "tree", 2);
    const std::size_t tree_line = line_no_;
    const double weight = parse_number<double>(toks[1], line_no_, "weight");

    struct Entry {
      std::size_t id;
      std::size_t line;
      std::size_t column;
      Node node;
    };
    std::vector<Entry> entries;
    for (;;) {
      toks = next_line();
      if (toks.empty()) {
        throw ParseError(line_no_ + 1, 1, "tree block is missing 'end'");
      }
      const std::string_view kw = toks[0].text;
      if (kw == "end") {
        expect_keyword(toks, "end", 1);
        break;
      }
      std::size_t id = 0;
      Node n;
      if (kw == "node") {
        expect_keyword(toks, "node", 6);
        id = parse_id(toks[1]);
        const auto fid = parse_number<std::int64_t>(toks[2], line_no_, "feature id");
        if (fid < 0 || static_cast<std::uint64_t>(fid) >= num_features_) {
          semantic(toks[2], "feature id out of range (" + std::string(toks[2].text) +
                                " not in [0, " + std::to_string(num_features_) + "))");
        }
        const double theta = parse_number<double>(toks[3], line_no_, "threshold");
        const auto left = parse_number<std::int64_t>(toks[4], line_no_, "child id");
        const auto right = parse_number<std::int64_t>(toks[5], line_no_, "child id");
        if (left < 0 || right < 0) {
          semantic(toks[left < 0 ? 4 : 5],
                   "node with one child (internal nodes need two children)");
        }
        if (left == right) {
          semantic(toks[5], "both children of a node refer to the same id");
        }
        n = Node::make_internal(static_cast<std::uint32_t>(fid), theta,
                                clamp_id(left), clamp_id(right));
      } else if (kw == "leaf") {
        expect_keyword(toks, "leaf", 3);
        id = parse_id(toks[1]);
        n = Node::make_leaf(parse_number<double>(toks[2], line_no_, "leaf value"));
      } else {
        throw ParseError(line_no_, toks[0].column,
                         "expected 'node', 'leaf' or 'end', got '" + std::string(kw) + "'");
      }
      entries.push_back({id, line_no_, toks[1].column, n});
    }
    if (entries.empty()) {
      throw Error(ErrorCode::kSemantic,
                  "tree at line " + std::to_string(tree_line) + ": empty tree block");
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.id < b.id; });
    std::vector<Node> nodes;
    nodes.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i > 0 && entries[i].id == entries[i - 1].id) {
        throw Error(ErrorCode::kSemantic,
                    "line " + std::to_string(entries[i].line) + ", column " +
                        std::to_string(entries[i].column) + ": duplicate node id " +
                        std::to_string(entries[i].id));
      }
      if (entries[i].id != nodes.size()) {
        throw Error(ErrorCode::kSemantic,
                    "tree at line " + std::to_string(tree_line) +
                        ": node ids are not dense (missing id " +
                        std::to_string(nodes.size()) + ")");
      }
      nodes.push_back(entries[i].node);
    }
    try {
      return {Tree::from_nodes(std::move(nodes), 0), weight};
    } catch (const Error& e) {
      throw Error(e.code(),
                  "tree at line " + std::to_string(tree_line) + ": " + e.what());
    }
  }

  std::size_t parse_id(const Token& tok) {
    const auto id = parse_number<std::int64_t>(tok, line_no_, "node id");
    if (id < 0 || id > std::int64_t{1} << 31) semantic(tok, "node id out of range");
    return static_cast<std::size_t>(id);
  }

  static std::uint32_t clamp_id(std::int64_t id) {
    return id > std::int64_t{0xffffffff} ? 0xffffffffu : static_cast<std::uint32_t>(id);
  }

  [[noreturn]] void semantic(const Token& tok, const std::string& what) const {
    throw Error(ErrorCode::kSemantic, "line " + std::to_string(line_no_) +
                                          ", column " + std::to_string(tok.column) +
                                          ": " + what);
  }

  void expect_keyword(const std::vector<Token>& toks, std::string_view kw,
                      std::size_t arity) const {
    if (toks[0].text != kw) {
      throw ParseError(line_no_, toks[0].column,
                       "expected '" + std::string(kw) + "', got '" +
                           std::string(toks[0].text) + "'");
    }
    if (toks.size() != arity) {
      const std::size_t col =
          toks.size() > arity ? toks[arity].column
                              : toks.back().column + toks.back().text.size();
      throw ParseError(line_no_, col,
                       "'" + std::string(kw) + "' takes " +
                           std::to_string(arity - 1) + " argument(s), got " +
                           std::to_string(toks.size() - 1));
    }
  }

  // Tokens of the next non-blank, non-comment line; empty at end of input.
  std::vector<Token> next_line() {
    while (pos_ < text_.size()) {
      std::size_t end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      std::string_view line = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      auto toks = tokenize(line);
      if (toks.empty() || toks[0].text.front() == '#') continue;
      return toks;
    }
    return {};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
  std::uint64_t num_features_ = 0;
};

}  // namespace detail

inline Ensemble parse_model(std::string_view text) {
  return detail::ModelParser(text).parse();
}

inline std::string serialize_model(const Ensemble& e) {
  std::string out;
  out += "ensemble " + std::to_string(e.num_features()) + " " +
         std::to_string(e.size()) + "\n";
  for (const auto& wt : e.trees()) {
    out += "tree " + detail::format_shortest(wt.weight) + "\n";
    const auto& nodes = wt.tree.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      if (n.is_leaf()) {
        out += "leaf " + std::to_string(i) + " " + detail::format_shortest(n.value) + "\n";
      } else {
        out += "node " + std::to_string(i) + " " + std::to_string(n.feature_id) + " " +
               detail::format_shortest(n.threshold) + " " + std::to_string(n.left) +
               " " + std::to_string(n.right) + "\n";
      }
    }
    out += "end\n";
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

inline Ensemble load_model(const std::filesystem::path& path) {
  return parse_model(read_text_file(path));
}

inline void save_model(const std::filesystem::path& path, const Ensemble& e) {
  write_text_file(path, serialize_model(e));
}

}  // namespace treeinfer
