#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attackdet/thread_model.hpp"

namespace attackdet {

// Which "preceding" comments qualify as context besides the ancestors:
// SameLevel takes every earlier comment at the target's level, SameParent
// restricts to earlier replies under the same parent.
enum class ContextPolicy { SameLevel, SameParent };

std::string_view to_string(ContextPolicy policy);  // "same-level" / "same-parent"
std::optional<ContextPolicy> policy_from_string(std::string_view s);

struct ContextEntry {
  Coordinate coord;
  std::string text;
  std::int64_t timestamp_ms = 0;

  bool operator==(const ContextEntry&) const = default;
};

// Ordered selection: ancestors root->parent first, then preceding peers in
// ascending seq. Never contains the target itself.
struct ContextWindow {
  Coordinate target;
  ContextPolicy policy = ContextPolicy::SameLevel;
  std::vector<ContextEntry> entries;
  std::size_t truncated = 0;  // entries dropped by a max-entries cap
};

// Path from the root to the target's parent (length level - 1, root first).
std::vector<CommentNode> ancestors(const ThreadBlock& block, Coordinate coord);

// Comments strictly earlier (smaller seq) at the target's level, optionally
// restricted to the same parent; ascending seq.
std::vector<CommentNode> preceding_peers(const ThreadBlock& block, Coordinate coord,
                                         ContextPolicy policy);

// The valid context of a target comment: its ancestors unioned with its
// preceding peers. Parallel branches and future replies are excluded by
// construction. When max_entries is given, oldest peers are dropped first,
// then root-most ancestors; the window records how many entries were dropped.
ContextWindow select_context(const ThreadBlock& block, Coordinate coord, ContextPolicy policy,
                             std::optional<std::size_t> max_entries = std::nullopt);

// One line per entry, "[Lx.y] <text>", in window order; empty window -> "".
std::string render_context(const ContextWindow& window);

}  // namespace attackdet
