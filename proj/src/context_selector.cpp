#include "attackdet/context_selector.hpp"

#include <algorithm>
#include <sstream>

namespace attackdet {

std::string_view to_string(ContextPolicy policy) {
  return policy == ContextPolicy::SameLevel ? "same-level" : "same-parent";
}

std::optional<ContextPolicy> policy_from_string(std::string_view s) {
  if (s == "same-level") return ContextPolicy::SameLevel;
  if (s == "same-parent") return ContextPolicy::SameParent;
  return std::nullopt;
}

std::vector<CommentNode> ancestors(const ThreadBlock& block, Coordinate coord) {
  const CommentNode* node = &block.node_at(coord);
  std::vector<CommentNode> chain;
  while (node->parent_id) {
    node = block.find_id(*node->parent_id);
    chain.push_back(*node);
  }
  std::reverse(chain.begin(), chain.end());  // root first, parent last
  return chain;
}

std::vector<CommentNode> preceding_peers(const ThreadBlock& block, Coordinate coord,
                                         ContextPolicy policy) {
  const CommentNode& target = block.node_at(coord);
  std::vector<CommentNode> peers;
  for (const auto& n : block.nodes()) {
    if (n.coord.level != coord.level || n.coord.seq >= coord.seq) continue;
    if (policy == ContextPolicy::SameParent && n.parent_id != target.parent_id) continue;
    peers.push_back(n);
  }
  std::sort(peers.begin(), peers.end(),
            [](const CommentNode& a, const CommentNode& b) { return a.coord.seq < b.coord.seq; });
  return peers;
}

ContextWindow select_context(const ThreadBlock& block, Coordinate coord, ContextPolicy policy,
                             std::optional<std::size_t> max_entries) {
  ContextWindow window;
  window.target = coord;
  window.policy = policy;

  const auto chain = ancestors(block, coord);
  auto peers = preceding_peers(block, coord, policy);

  if (max_entries && chain.size() + peers.size() > *max_entries) {
    std::size_t excess = chain.size() + peers.size() - *max_entries;
    const std::size_t from_peers = std::min(excess, peers.size());
    peers.erase(peers.begin(), peers.begin() + static_cast<std::ptrdiff_t>(from_peers));
    window.truncated = excess;
    excess -= from_peers;
    // Still over budget: shed root-most ancestors.
    for (std::size_t i = excess; i < chain.size(); ++i) {
      window.entries.push_back({chain[i].coord, chain[i].text, chain[i].timestamp_ms});
    }
  } else {
    for (const auto& n : chain) {
      window.entries.push_back({n.coord, n.text, n.timestamp_ms});
    }
  }
  for (const auto& n : peers) {
    window.entries.push_back({n.coord, n.text, n.timestamp_ms});
  }
  return window;
}

std::string render_context(const ContextWindow& window) {
  std::ostringstream os;
  bool first = true;
  for (const auto& e : window.entries) {
    if (!first) os << '\n';
    first = false;
    os << "[L" << e.coord.level << '.' << e.coord.seq << "] " << e.text;
  }
  return os.str();
}

}  // namespace attackdet
