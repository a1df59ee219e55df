#include <doctest.h>

#include <random>

#include "attackdet/context_selector.hpp"
#include "test_support.hpp"

using namespace attackdet;

namespace {

// {(1,1); (2,1); (2,2); (3,1) child of (2,1)}
ThreadBlock four_node_tree() {
  return build_thread_block("b", {{
                                     {"r", "anchor", 0, std::nullopt},
                                     {"p", "first reply", 10, "r"},
                                     {"q", "second reply", 20, "r"},
                                     {"c", "nested", 30, "p"},
                                 }});
}

std::vector<Coordinate> coords(const std::vector<CommentNode>& nodes) {
  std::vector<Coordinate> out;
  for (const auto& n : nodes) out.push_back(n.coord);
  return out;
}

std::vector<Coordinate> coords(const ContextWindow& window) {
  std::vector<Coordinate> out;
  for (const auto& e : window.entries) out.push_back(e.coord);
  return out;
}

}  // namespace

TEST_CASE("ancestors walk root-first to the parent") {
  const ThreadBlock block = four_node_tree();
  CHECK(ancestors(block, {1, 1}).empty());
  CHECK(coords(ancestors(block, {3, 1})) == std::vector<Coordinate>{{1, 1}, {2, 1}});
  CHECK_THROWS_AS((void)ancestors(block, {5, 5}), Error);
}

TEST_CASE("preceding peers respect the policy") {
  const ThreadBlock block = four_node_tree();
  CHECK(preceding_peers(block, {2, 1}, ContextPolicy::SameLevel).empty());
  CHECK(coords(preceding_peers(block, {2, 2}, ContextPolicy::SameLevel)) ==
        std::vector<Coordinate>{{2, 1}});

  // (3,2) whose parent differs from (3,1)'s: peer under SameLevel only
  const ThreadBlock wide = build_thread_block("w", {{
                                                       {"r", "anchor", 0, std::nullopt},
                                                       {"p", "a", 1, "r"},
                                                       {"q", "b", 2, "r"},
                                                       {"x", "under p", 3, "p"},
                                                       {"y", "under q", 4, "q"},
                                                   }});
  CHECK(coords(preceding_peers(wide, {3, 2}, ContextPolicy::SameLevel)) ==
        std::vector<Coordinate>{{3, 1}});
  CHECK(preceding_peers(wide, {3, 2}, ContextPolicy::SameParent).empty());
}

TEST_CASE("select_context unions ancestors with preceding peers") {
  const ThreadBlock block = four_node_tree();
  CHECK(select_context(block, {1, 1}, ContextPolicy::SameLevel).entries.empty());
  CHECK(coords(select_context(block, {2, 2}, ContextPolicy::SameLevel)) ==
        std::vector<Coordinate>{{1, 1}, {2, 1}});
  CHECK(coords(select_context(block, {3, 1}, ContextPolicy::SameLevel)) ==
        std::vector<Coordinate>{{1, 1}, {2, 1}});
}

TEST_CASE("window size and contents match the exhaustive-scan oracle") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 60; ++i) {
    const ThreadBlock block = testing::random_block(rng, "b" + std::to_string(i), 6, 60);
    for (const auto& node : block.nodes()) {
      for (const auto policy : {ContextPolicy::SameLevel, ContextPolicy::SameParent}) {
        const ContextWindow window = select_context(block, node.coord, policy);
        CHECK(window.entries == testing::oracle_context(block, node.coord, policy));
        const auto peers = preceding_peers(block, node.coord, policy);
        CHECK(window.entries.size() ==
              static_cast<std::size_t>(node.coord.level - 1) + peers.size());
        for (const auto& entry : window.entries) {
          CHECK(entry.coord != node.coord);
          if (entry.coord.level == node.coord.level) {
            CHECK(entry.coord.seq < node.coord.seq);
          }
        }
      }
    }
  }
}

TEST_CASE("render_context emits one [Lx.y] line per entry") {
  ContextWindow empty;
  CHECK(render_context(empty) == "");

  ContextWindow one;
  one.entries.push_back({{1, 1}, "hi", 0});
  CHECK(render_context(one) == "[L1.1] hi");

  ContextWindow two = one;
  two.entries.push_back({{2, 1}, "there", 1});
  CHECK(render_context(two) == "[L1.1] hi\n[L2.1] there");
}

TEST_CASE("max-entries cap drops oldest peers first") {
  const ThreadBlock block = build_thread_block("b", {{
                                                        {"r", "anchor", 0, std::nullopt},
                                                        {"a", "one", 1, "r"},
                                                        {"b", "two", 2, "r"},
                                                        {"c", "three", 3, "r"},
                                                        {"d", "four", 4, "r"},
                                                    }});
  const ContextWindow window = select_context(block, {2, 4}, ContextPolicy::SameLevel, 2);
  CHECK(window.truncated == 2);
  CHECK(coords(window) == std::vector<Coordinate>{{1, 1}, {2, 3}});  // ancestor kept, newest peer

  const ContextWindow all = select_context(block, {2, 4}, ContextPolicy::SameLevel, 10);
  CHECK(all.truncated == 0);
  CHECK(all.entries.size() == 4);
}
