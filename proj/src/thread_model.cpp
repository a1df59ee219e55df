#include "attackdet/thread_model.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace attackdet {

namespace {

bool node_order(const CommentNode& a, const CommentNode& b) {
  return std::tie(a.coord.level, a.coord.seq, a.id) < std::tie(b.coord.level, b.coord.seq, b.id);
}

const nlohmann::json& require_field(const nlohmann::json& j, const char* field,
                                    const std::string& where) {
  const auto it = j.find(field);
  if (it == j.end()) {
    raise(Errc::ParseError, "missing \"" + std::string(field) + "\" field in " + where);
  }
  return *it;
}

std::string require_string(const nlohmann::json& j, const char* field, const std::string& where) {
  const auto& v = require_field(j, field, where);
  if (!v.is_string()) {
    raise(Errc::ParseError, "\"" + std::string(field) + "\" must be a string in " + where);
  }
  return v.get<std::string>();
}

std::int64_t require_int(const nlohmann::json& j, const char* field, const std::string& where) {
  const auto& v = require_field(j, field, where);
  if (!v.is_number_integer()) {
    raise(Errc::ParseError, "\"" + std::string(field) + "\" must be an integer in " + where);
  }
  return v.get<std::int64_t>();
}

}  // namespace

std::string to_string(Coordinate c) {
  std::ostringstream os;
  os << '(' << c.level << ',' << c.seq << ')';
  return os.str();
}

ThreadBlock ThreadBlock::from_parts(std::string block_id, std::optional<std::string> source,
                                    std::vector<CommentNode> nodes,
                                    bool timestamps_synthesized) {
  ThreadBlock b;
  b.block_id_ = std::move(block_id);
  b.source_ = std::move(source);
  b.nodes_ = std::move(nodes);
  b.timestamps_synthesized_ = timestamps_synthesized;
  std::sort(b.nodes_.begin(), b.nodes_.end(), node_order);
  return b;
}

const CommentNode* ThreadBlock::find(Coordinate coord) const {
  const auto it = std::lower_bound(
      nodes_.begin(), nodes_.end(), coord,
      [](const CommentNode& n, Coordinate c) { return n.coord < c; });
  if (it != nodes_.end() && it->coord == coord) return &*it;
  return nullptr;
}

const CommentNode* ThreadBlock::find_id(std::string_view id) const {
  for (const auto& n : nodes_) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const CommentNode& ThreadBlock::node_at(Coordinate coord) const {
  if (const CommentNode* n = find(coord)) return *n;
  raise(Errc::CoordNotFound, "no comment at " + to_string(coord) + " in block " + block_id_);
}

int ThreadBlock::max_level() const {
  return nodes_.empty() ? 0 : nodes_.back().coord.level;
}

ThreadBlock build_thread_block(std::string block_id, std::span<const RawComment> raw_comments,
                               std::optional<std::string> source, bool timestamps_synthesized) {
  if (raw_comments.empty()) {
    raise(Errc::NoRoot, "block " + block_id + " has no comments");
  }

  std::unordered_map<std::string_view, std::size_t> by_id;
  by_id.reserve(raw_comments.size());
  for (std::size_t i = 0; i < raw_comments.size(); ++i) {
    if (!by_id.emplace(raw_comments[i].id, i).second) {
      raise(Errc::DuplicateId, "comment id \"" + raw_comments[i].id + "\" appears twice");
    }
  }

  std::size_t roots = 0;
  for (const auto& c : raw_comments) {
    if (!c.parent_id) {
      ++roots;
      continue;
    }
    if (!by_id.contains(*c.parent_id)) {
      raise(Errc::MissingParent,
            "comment \"" + c.id + "\" replies to unknown id \"" + *c.parent_id + "\"");
    }
  }
  if (roots == 0) raise(Errc::NoRoot, "block " + block_id + " has no root comment");
  if (roots > 1) {
    raise(Errc::MultipleRoots,
          "block " + block_id + " has " + std::to_string(roots) + " root comments");
  }

  // Level = length of the parent chain + 1, with cycle detection.
  std::vector<int> level(raw_comments.size(), 0);
  for (std::size_t i = 0; i < raw_comments.size(); ++i) {
    if (level[i] != 0) continue;
    std::vector<std::size_t> chain;
    std::size_t cur = i;
    while (level[cur] == 0) {
      chain.push_back(cur);
      if (!raw_comments[cur].parent_id) {
        level[cur] = 1;
        break;
      }
      cur = by_id.at(*raw_comments[cur].parent_id);
      if (std::find(chain.begin(), chain.end(), cur) != chain.end()) {
        raise(Errc::CycleDetected, "reply cycle through comment \"" + raw_comments[cur].id + "\"");
      }
    }
    // Unwind: each node sits one level below its parent.
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      if (level[*it] == 0) {
        level[*it] = level[by_id.at(*raw_comments[*it].parent_id)] + 1;
      }
    }
  }

  // Chronological seq per level: ascending timestamp, ties by id.
  std::map<int, std::vector<std::size_t>> per_level;
  for (std::size_t i = 0; i < raw_comments.size(); ++i) {
    per_level[level[i]].push_back(i);
  }
  std::vector<CommentNode> nodes(raw_comments.size());
  for (auto& [lvl, members] : per_level) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(raw_comments[a].timestamp_ms, raw_comments[a].id) <
             std::tie(raw_comments[b].timestamp_ms, raw_comments[b].id);
    });
    int seq = 1;
    for (std::size_t idx : members) {
      const auto& c = raw_comments[idx];
      nodes[idx] = CommentNode{c.id, c.text, c.timestamp_ms, Coordinate{lvl, seq++}, c.parent_id};
    }
  }

  return ThreadBlock::from_parts(std::move(block_id), std::move(source), std::move(nodes),
                                 timestamps_synthesized);
}

const CommentNode& get_node(const ThreadBlock& block, Coordinate coord) {
  return block.node_at(coord);
}

std::vector<Violation> validate_block(const ThreadBlock& block) {
  std::vector<Violation> out;
  const auto nodes = block.nodes();
  if (nodes.empty()) {
    out.push_back({"SingleRoot", block.block_id(), "block has no comments"});
    return out;
  }

  std::unordered_map<std::string_view, const CommentNode*> by_id;
  for (const auto& n : nodes) {
    if (!by_id.emplace(n.id, &n).second) {
      out.push_back({"DuplicateId", n.id, "comment id appears more than once"});
    }
  }

  std::size_t roots = 0;
  std::map<Coordinate, std::size_t> coord_count;
  std::map<int, std::vector<const CommentNode*>> per_level;
  for (const auto& n : nodes) {
    if (n.coord.level < 1 || n.coord.seq < 1) {
      out.push_back({"CoordBounds", n.id, "coordinate " + to_string(n.coord) + " below (1,1)"});
    }
    if (++coord_count[n.coord] == 2) {
      out.push_back({"DuplicateCoord", n.id, "coordinate " + to_string(n.coord) + " reused"});
    }
    per_level[n.coord.level].push_back(&n);
    if (n.coord.level == 1) ++roots;

    if (n.parent_id.has_value() != (n.coord.level > 1)) {
      out.push_back({"RootParent", n.id,
                     n.parent_id ? "level-1 comment must not have a parent"
                                 : "comment above level 1 must have a parent"});
      continue;
    }
    if (!n.parent_id) continue;
    const auto parent = by_id.find(*n.parent_id);
    if (parent == by_id.end()) {
      out.push_back({"MissingParent", n.id, "parent id \"" + *n.parent_id + "\" not in block"});
    } else if (parent->second->coord.level != n.coord.level - 1) {
      out.push_back({"LevelStep", n.id,
                     "parent at level " + std::to_string(parent->second->coord.level) +
                         ", expected " + std::to_string(n.coord.level - 1)});
    }
  }
  if (roots != 1) {
    out.push_back({"SingleRoot", block.block_id(),
                   "expected exactly one level-1 comment, found " + std::to_string(roots)});
  }

  for (const auto& [lvl, members] : per_level) {
    std::vector<int> seqs;
    for (const auto* n : members) seqs.push_back(n->coord.seq);
    std::sort(seqs.begin(), seqs.end());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (seqs[i] != static_cast<int>(i) + 1) {
        out.push_back({"DenseSeq", block.block_id(),
                       "level " + std::to_string(lvl) + " seq values are not the dense range 1.." +
                           std::to_string(seqs.size())});
        break;
      }
    }
    // seq order must agree with (timestamp, id) order
    auto sorted = members;
    std::sort(sorted.begin(), sorted.end(), [](const CommentNode* a, const CommentNode* b) {
      return std::tie(a->timestamp_ms, a->id) < std::tie(b->timestamp_ms, b->id);
    });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      if (sorted[i]->coord.seq > sorted[i + 1]->coord.seq) {
        out.push_back({"SeqOrder", sorted[i]->id,
                       "seq disagrees with chronological order at level " + std::to_string(lvl)});
        break;
      }
    }
  }

  // Parent links must reach the anchor in exactly level-1 steps.
  for (const auto& n : nodes) {
    if (n.coord.level <= 1) continue;
    const CommentNode* cur = &n;
    int steps = 0;
    std::unordered_set<const CommentNode*> seen;
    bool dangling = false;
    bool cycle = false;
    while (cur->parent_id) {
      if (!seen.insert(cur).second) {
        cycle = true;
        break;
      }
      const auto it = by_id.find(*cur->parent_id);
      if (it == by_id.end()) {
        dangling = true;  // already reported as MissingParent
        break;
      }
      cur = it->second;
      ++steps;
    }
    if (cycle) {
      out.push_back({"Reachability", n.id, "parent chain contains a cycle"});
    } else if (!dangling && (cur->coord.level != 1 || steps != n.coord.level - 1)) {
      out.push_back({"Reachability", n.id,
                     "parent chain reaches level " + std::to_string(cur->coord.level) + " in " +
                         std::to_string(steps) + " steps, expected the anchor in " +
                         std::to_string(n.coord.level - 1)});
    }
  }

  return out;
}

nlohmann::json block_to_json(const ThreadBlock& block) {
  nlohmann::json j;
  j["block_id"] = block.block_id();
  if (block.source()) j["source"] = *block.source();
  if (block.timestamps_synthesized()) j["timestamps_synthesized"] = true;
  nlohmann::json comments = nlohmann::json::array();
  for (const auto& n : block.nodes()) {
    nlohmann::json c;
    c["id"] = n.id;
    c["text"] = n.text;
    c["timestamp_ms"] = n.timestamp_ms;
    c["parent_id"] = n.parent_id ? nlohmann::json(*n.parent_id) : nlohmann::json(nullptr);
    c["level"] = n.coord.level;
    c["seq"] = n.coord.seq;
    comments.push_back(std::move(c));
  }
  j["comments"] = std::move(comments);
  return j;
}

ThreadBlock block_from_json(const nlohmann::json& j) {
  if (!j.is_object()) raise(Errc::ParseError, "thread-block record must be a JSON object");
  std::string block_id = require_string(j, "block_id", "block record");
  std::optional<std::string> source;
  if (j.contains("source") && !j["source"].is_null()) {
    if (!j["source"].is_string()) raise(Errc::ParseError, "\"source\" must be a string");
    source = j["source"].get<std::string>();
  }
  bool synthesized = j.value("timestamps_synthesized", false);

  const auto& comments = require_field(j, "comments", "block record");
  if (!comments.is_array() || comments.empty()) {
    raise(Errc::ParseError, "\"comments\" must be a non-empty array in block " + block_id);
  }

  std::vector<RawComment> raw;
  std::vector<Coordinate> declared;
  raw.reserve(comments.size());
  bool any_timestamp = false;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    const auto& c = comments[i];
    const std::string where = "comments[" + std::to_string(i) + "] of block " + block_id;
    if (!c.is_object()) raise(Errc::ParseError, where + " must be an object");
    RawComment rc;
    rc.id = require_string(c, "id", where);
    rc.text = require_string(c, "text", where);
    if (c.contains("timestamp_ms") && !c["timestamp_ms"].is_null()) {
      rc.timestamp_ms = require_int(c, "timestamp_ms", where);
      any_timestamp = true;
    } else {
      rc.timestamp_ms = static_cast<std::int64_t>(i);  // provisional; checked below
    }
    if (c.contains("parent_id") && !c["parent_id"].is_null()) {
      if (!c["parent_id"].is_string()) {
        raise(Errc::ParseError, "\"parent_id\" must be a string or null in " + where);
      }
      rc.parent_id = c["parent_id"].get<std::string>();
    }
    declared.push_back(Coordinate{static_cast<int>(require_int(c, "level", where)),
                                  static_cast<int>(require_int(c, "seq", where))});
    raw.push_back(std::move(rc));
  }

  if (!any_timestamp) {
    // Timestamps synthesized from file order; the block is flagged.
    synthesized = true;
  } else {
    for (std::size_t i = 0; i < comments.size(); ++i) {
      if (!comments[i].contains("timestamp_ms") || comments[i]["timestamp_ms"].is_null()) {
        raise(Errc::ParseError, "\"timestamp_ms\" missing for comment \"" + raw[i].id +
                                    "\" but present elsewhere in block " + block_id);
      }
    }
  }

  ThreadBlock block = build_thread_block(std::move(block_id), raw, std::move(source), synthesized);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const CommentNode* n = block.find_id(raw[i].id);
    if (n->coord != declared[i]) {
      raise(Errc::ValidationError, "comment \"" + raw[i].id + "\" declares " +
                                       to_string(declared[i]) + " but computes to " +
                                       to_string(n->coord));
    }
  }
  return block;
}

std::string serialize_block(const ThreadBlock& block) { return block_to_json(block).dump(); }

ThreadBlock parse_block(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    raise(Errc::ParseError, e.what());
  }
  return block_from_json(j);
}

}  // namespace attackdet
