#pragma once

namespace attackdet {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever an emitted wire format (thread-block JSONL, outcome JSONL,
// reports, partition files) changes incompatibly.
inline constexpr int kSchemaVersion = 1;

}  // namespace attackdet
