#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "attackdet/errors.hpp"

namespace attackdet {

// (level, seq): level is tree depth with the anchor at 1, seq the
// chronological index among all comments of that level within the block.
struct Coordinate {
  int level = 0;
  int seq = 0;

  friend auto operator<=>(const Coordinate&, const Coordinate&) = default;
};

std::string to_string(Coordinate c);  // "(2,1)"

// (block_id, coordinate) pair keying per-comment annotations.
using GoldKey = std::pair<std::string, Coordinate>;

struct CommentNode {
  std::string id;
  std::string text;
  std::int64_t timestamp_ms = 0;
  Coordinate coord;
  std::optional<std::string> parent_id;  // absent iff coord.level == 1

  bool operator==(const CommentNode&) const = default;
};

struct RawComment {
  std::string id;
  std::string text;
  std::int64_t timestamp_ms = 0;
  std::optional<std::string> parent_id;
};

// A level-1 comment block: one anchor comment plus its complete chain of
// sub-comments. Immutable after construction; edits require rebuilding.
class ThreadBlock {
 public:
  ThreadBlock() = default;

  // No invariant checks; exists so validate_block can be exercised on broken
  // blocks. Nodes are sorted by (level, seq, id).
  static ThreadBlock from_parts(std::string block_id, std::optional<std::string> source,
                                std::vector<CommentNode> nodes,
                                bool timestamps_synthesized = false);

  const std::string& block_id() const { return block_id_; }
  const std::optional<std::string>& source() const { return source_; }
  std::span<const CommentNode> nodes() const { return nodes_; }
  bool timestamps_synthesized() const { return timestamps_synthesized_; }

  const CommentNode* find(Coordinate coord) const;
  const CommentNode* find_id(std::string_view id) const;
  const CommentNode& node_at(Coordinate coord) const;  // throws Errc::CoordNotFound
  int max_level() const;

  bool operator==(const ThreadBlock&) const = default;

 private:
  std::string block_id_;
  std::optional<std::string> source_;
  std::vector<CommentNode> nodes_;  // (level, seq, id) order
  bool timestamps_synthesized_ = false;
};

// Computes levels from parent chains and assigns seq by ascending timestamp
// within each level (ties broken by id, lexicographically). Throws
// Errc::{DuplicateId, MissingParent, MultipleRoots, NoRoot, CycleDetected}.
ThreadBlock build_thread_block(std::string block_id, std::span<const RawComment> raw_comments,
                               std::optional<std::string> source = std::nullopt,
                               bool timestamps_synthesized = false);

const CommentNode& get_node(const ThreadBlock& block, Coordinate coord);

// Empty iff all block invariants hold: single anchor, parent links step one
// level and reach the anchor, coordinates unique and dense per level, seq
// ordered by (timestamp, id), parent_id present exactly for levels > 1.
std::vector<Violation> validate_block(const ThreadBlock& block);

// Thread-block JSONL: one single-line JSON object per block; see
// docs/schema.md for the exact field set. parse_block(serialize_block(b)) is
// the identity on valid blocks.
std::string serialize_block(const ThreadBlock& block);
ThreadBlock parse_block(std::string_view text);  // throws Errc::ParseError

nlohmann::json block_to_json(const ThreadBlock& block);
ThreadBlock block_from_json(const nlohmann::json& j);

}  // namespace attackdet
