#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attackdet/context_selector.hpp"
#include "attackdet/taxonomy.hpp"
#include "attackdet/thread_model.hpp"

namespace attackdet {

enum class CorpusFormat { ThreadJsonl, FlatCsv };

struct Corpus {
  std::vector<ThreadBlock> blocks;
  std::map<GoldKey, LabelRecord> gold;
  std::string provenance;

  const ThreadBlock* find_block(std::string_view block_id) const;
  std::size_t comment_count() const;
  bool fully_labeled() const;
};

// Thread-block JSONL (one block per line, gold keyed by comment id) or a flat
// CSV through the mapping config. Throws Errc::ParseError with the line
// number and Errc::ValidationError for gold keys that resolve to nothing.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const nlohmann::json* mapping = nullptr);
Corpus corpus_from_jsonl(std::istream& in, std::string provenance);

void write_corpus(const Corpus& corpus, std::ostream& out);
std::string block_line(const Corpus& corpus, const ThreadBlock& block);  // one JSONL line

struct SplitResult {
  Corpus train;
  Corpus val;
  Corpus test;
};

// Seeded split at thread-block granularity (splitmix64 + Fisher-Yates over
// blocks ordered by block_id; see docs/schema.md for the exact recipe). Block
// counts are floor-allocated with remainders going to train. When
// designated_test is given those blocks form the test set and the first two
// ratios split the remainder.
SplitResult split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed,
                         const std::vector<std::string>* designated_test = nullptr);

struct DetectorItem {
  std::string block_id;
  Coordinate coord;
  std::string comment;
  bool positive = false;
};

struct ContextDetectorItem {
  std::string block_id;
  Coordinate coord;
  std::string comment;
  std::string context;
  bool positive = false;
};

struct AnalyzerItem {
  std::string block_id;
  Coordinate coord;
  std::string comment;
  LabelRecord record;
};

struct ContextAnalyzerItem {
  std::string block_id;
  Coordinate coord;
  std::string comment;
  std::string context;
  LabelRecord record;
};

// The four module-specific sub-datasets: the explicit detector sees every
// comment, the implicit detector every non-explicit comment (with context),
// each analyzer exactly its own class.
struct ModulePartition {
  std::vector<DetectorItem> explicit_detector_set;
  std::vector<AnalyzerItem> explicit_analyzer_set;
  std::vector<ContextDetectorItem> implicit_detector_set;
  std::vector<ContextAnalyzerItem> implicit_analyzer_set;
};

// Requires a fully gold-labeled corpus (Errc::MissingGold otherwise); items
// ordered by (block_id, level, seq).
ModulePartition partition_for_modules(const Corpus& corpus, ContextPolicy policy);

// Writes the four JSONL files plus manifest.json into dir.
void write_partition(const ModulePartition& partition, ContextPolicy policy,
                     const std::filesystem::path& dir);

struct FlatCategoryCount {
  std::string name;
  std::size_t count = 0;
  double percent = 0.0;  // share of mapped rows, unrounded
};

struct FlatReport {
  std::size_t rows = 0;
  std::vector<FlatCategoryCount> categories;  // one per mapping rule, rule order
};

// Imports a flat CSV benchmark: each row becomes a single-node block with a
// synthesized timestamp (= row index) and the gold record of the first
// mapping rule whose column conditions all match. Throws Errc::UnmappedClass
// when no rule matches and Errc::ParseError for malformed CSV/config.
Corpus import_flat(const std::filesystem::path& path, const nlohmann::json& mapping,
                   FlatReport* report = nullptr);

// Depth/size guards applied by the CLI after loading.
void enforce_limits(const Corpus& corpus, int max_depth, std::size_t max_nodes);

// Documented PRNG recipe behind split_corpus, exposed for reproducibility.
std::uint64_t splitmix64_next(std::uint64_t& state);
void seeded_shuffle(std::vector<std::size_t>& indices, std::uint64_t seed);

// Minimal RFC-4180 CSV reader (quoted fields, embedded separators/newlines);
// first row is the header.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

}  // namespace attackdet
