#include "attackdet/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "attackdet/version.hpp"

namespace attackdet {

namespace {

constexpr double kRatioTolerance = 1e-9;

std::ifstream open_or_raise(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::ConfigError, "cannot read " + path.string());
  return in;
}

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& indices,
              std::string provenance) {
  Corpus out;
  out.provenance = std::move(provenance);
  std::vector<std::size_t> sorted = indices;
  std::sort(sorted.begin(), sorted.end());  // keep the input block order
  for (std::size_t i : sorted) {
    const ThreadBlock& block = corpus.blocks[i];
    out.blocks.push_back(block);
    for (const auto& node : block.nodes()) {
      const auto it = corpus.gold.find({block.block_id(), node.coord});
      if (it != corpus.gold.end()) out.gold.emplace(it->first, it->second);
    }
  }
  return out;
}

}  // namespace

const ThreadBlock* Corpus::find_block(std::string_view block_id) const {
  for (const auto& block : blocks) {
    if (block.block_id() == block_id) return &block;
  }
  return nullptr;
}

std::size_t Corpus::comment_count() const {
  std::size_t n = 0;
  for (const auto& block : blocks) n += block.nodes().size();
  return n;
}

bool Corpus::fully_labeled() const {
  for (const auto& block : blocks) {
    for (const auto& node : block.nodes()) {
      if (!gold.contains({block.block_id(), node.coord})) return false;
    }
  }
  return true;
}

Corpus corpus_from_jsonl(std::istream& in, std::string provenance) {
  Corpus corpus;
  corpus.provenance = std::move(provenance);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      raise(Errc::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    ThreadBlock block;
    try {
      block = block_from_json(j);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("gold")) {
      if (!j["gold"].is_object()) {
        raise(Errc::ParseError,
              "line " + std::to_string(line_no) + ": \"gold\" must be an object");
      }
      for (const auto& [comment_id, record_json] : j["gold"].items()) {
        const CommentNode* node = block.find_id(comment_id);
        if (node == nullptr) {
          raise(Errc::ValidationError, "line " + std::to_string(line_no) + ": gold entry \"" +
                                           comment_id + "\" matches no comment in block " +
                                           block.block_id());
        }
        LabelRecord record;
        try {
          record = record_from_json(record_json);
        } catch (const Error& e) {
          throw Error(e.code(), "line " + std::to_string(line_no) + ": gold \"" + comment_id +
                                    "\": " + e.what());
        }
        corpus.gold.emplace(GoldKey{block.block_id(), node->coord}, record);
      }
    }
    corpus.blocks.push_back(std::move(block));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const nlohmann::json* mapping) {
  if (format == CorpusFormat::FlatCsv) {
    if (mapping == nullptr) {
      raise(Errc::ConfigError, "flat_csv corpora require a mapping config");
    }
    return import_flat(path, *mapping);
  }
  auto in = open_or_raise(path);
  return corpus_from_jsonl(in, path.string());
}

std::string block_line(const Corpus& corpus, const ThreadBlock& block) {
  nlohmann::json j = block_to_json(block);
  nlohmann::json gold = nlohmann::json::object();
  for (const auto& node : block.nodes()) {
    const auto it = corpus.gold.find({block.block_id(), node.coord});
    if (it != corpus.gold.end()) gold[node.id] = record_to_json(it->second);
  }
  if (!gold.empty()) j["gold"] = std::move(gold);
  return j.dump();
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& block : corpus.blocks) {
    out << block_line(corpus, block) << '\n';
  }
}

std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void seeded_shuffle(std::vector<std::size_t>& indices, std::uint64_t seed) {
  std::uint64_t state = seed;
  for (std::size_t i = indices.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(splitmix64_next(state) % i);
    std::swap(indices[i - 1], indices[j]);
  }
}

SplitResult split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed, const std::vector<std::string>* designated_test) {
  for (double r : ratios) {
    if (!(r > 0.0)) raise(Errc::BadRatios, "ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > kRatioTolerance) {
    raise(Errc::BadRatios, "ratios must sum to 1");
  }

  std::vector<std::size_t> test_idx;
  std::vector<std::size_t> pool;  // indices eligible for the shuffled split
  if (designated_test != nullptr) {
    std::map<std::string_view, std::size_t> by_id;
    for (std::size_t i = 0; i < corpus.blocks.size(); ++i) {
      by_id.emplace(corpus.blocks[i].block_id(), i);
    }
    std::vector<bool> designated(corpus.blocks.size(), false);
    for (const auto& id : *designated_test) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        raise(Errc::UnknownDesignatedBlock, "designated test block \"" + id + "\" not in corpus");
      }
      designated[it->second] = true;
    }
    for (std::size_t i = 0; i < corpus.blocks.size(); ++i) {
      (designated[i] ? test_idx : pool).push_back(i);
    }
  } else {
    pool.resize(corpus.blocks.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }

  // Deterministic base order (by block_id, ties by position), then the
  // documented seeded shuffle decides membership.
  std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(corpus.blocks[a].block_id(), a) < std::tie(corpus.blocks[b].block_id(), b);
  });
  seeded_shuffle(pool, seed);

  std::size_t n_val = 0, n_test = 0;
  if (designated_test != nullptr) {
    const double val_share = ratios[1] / (ratios[0] + ratios[1]);
    n_val = static_cast<std::size_t>(std::floor(static_cast<double>(pool.size()) * val_share));
  } else {
    n_val = static_cast<std::size_t>(std::floor(static_cast<double>(pool.size()) * ratios[1]));
    n_test = static_cast<std::size_t>(std::floor(static_cast<double>(pool.size()) * ratios[2]));
  }
  const std::size_t n_train = pool.size() - n_val - n_test;

  std::vector<std::size_t> train_idx(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val_idx(pool.begin() + static_cast<std::ptrdiff_t>(n_train),
                                   pool.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  test_idx.insert(test_idx.end(), pool.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                  pool.end());

  SplitResult result;
  result.train = subset(corpus, train_idx, corpus.provenance + "#train");
  result.val = subset(corpus, val_idx, corpus.provenance + "#val");
  result.test = subset(corpus, test_idx, corpus.provenance + "#test");
  return result;
}

ModulePartition partition_for_modules(const Corpus& corpus, ContextPolicy policy) {
  ModulePartition partition;
  for (const auto& block : corpus.blocks) {
    for (const auto& node : block.nodes()) {
      const auto it = corpus.gold.find({block.block_id(), node.coord});
      if (it == corpus.gold.end()) {
        raise(Errc::MissingGold,
              "comment \"" + node.id + "\" in block " + block.block_id() + " has no gold record");
      }
      const LabelRecord& gold = it->second;
      const bool is_explicit = gold.presence == AttackPresence::Explicit;
      const bool is_implicit = gold.presence == AttackPresence::Implicit;

      partition.explicit_detector_set.push_back(
          {block.block_id(), node.coord, node.text, is_explicit});
      if (is_explicit) {
        partition.explicit_analyzer_set.push_back({block.block_id(), node.coord, node.text, gold});
        continue;  // explicit comments never reach the implicit stage
      }
      const std::string context = render_context(select_context(block, node.coord, policy));
      partition.implicit_detector_set.push_back(
          {block.block_id(), node.coord, node.text, context, is_implicit});
      if (is_implicit) {
        partition.implicit_analyzer_set.push_back(
            {block.block_id(), node.coord, node.text, context, gold});
      }
    }
  }

  const auto order = [](const auto& a, const auto& b) {
    return std::tie(a.block_id, a.coord) < std::tie(b.block_id, b.coord);
  };
  std::sort(partition.explicit_detector_set.begin(), partition.explicit_detector_set.end(), order);
  std::sort(partition.explicit_analyzer_set.begin(), partition.explicit_analyzer_set.end(), order);
  std::sort(partition.implicit_detector_set.begin(), partition.implicit_detector_set.end(), order);
  std::sort(partition.implicit_analyzer_set.begin(), partition.implicit_analyzer_set.end(), order);
  return partition;
}

void write_partition(const ModulePartition& partition, ContextPolicy policy,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) raise(Errc::ConfigError, "cannot write " + (dir / name).string());
    return out;
  };

  {
    auto out = open("explicit_detector.jsonl");
    for (const auto& item : partition.explicit_detector_set) {
      out << nlohmann::json{{"block_id", item.block_id},
                            {"level", item.coord.level},
                            {"seq", item.coord.seq},
                            {"comment", item.comment},
                            {"label", item.positive}}
                 .dump()
          << '\n';
    }
  }
  {
    auto out = open("explicit_analyzer.jsonl");
    for (const auto& item : partition.explicit_analyzer_set) {
      out << nlohmann::json{{"block_id", item.block_id},
                            {"level", item.coord.level},
                            {"seq", item.coord.seq},
                            {"comment", item.comment},
                            {"record", record_to_json(item.record)}}
                 .dump()
          << '\n';
    }
  }
  {
    auto out = open("implicit_detector.jsonl");
    for (const auto& item : partition.implicit_detector_set) {
      out << nlohmann::json{{"block_id", item.block_id},
                            {"level", item.coord.level},
                            {"seq", item.coord.seq},
                            {"comment", item.comment},
                            {"context", item.context},
                            {"label", item.positive}}
                 .dump()
          << '\n';
    }
  }
  {
    auto out = open("implicit_analyzer.jsonl");
    for (const auto& item : partition.implicit_analyzer_set) {
      out << nlohmann::json{{"block_id", item.block_id},
                            {"level", item.coord.level},
                            {"seq", item.coord.seq},
                            {"comment", item.comment},
                            {"context", item.context},
                            {"record", record_to_json(item.record)}}
                 .dump()
          << '\n';
    }
  }

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["schema_version"] = kSchemaVersion;
  manifest["policy"] = std::string(to_string(policy));
  manifest["counts"] = {{"explicit_detector", partition.explicit_detector_set.size()},
                        {"explicit_analyzer", partition.explicit_analyzer_set.size()},
                        {"implicit_detector", partition.implicit_detector_set.size()},
                        {"implicit_analyzer", partition.implicit_analyzer_set.size()}};
  auto out = open("manifest.json");
  out << manifest.dump(2) << '\n';
}

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) {
          raise(Errc::ParseError, "row " + std::to_string(rows.size() + 1) +
                                      ": quote inside an unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (!field.empty() || field_started || !row.empty()) {
          row.push_back(std::move(field));
          field.clear();
          rows.push_back(std::move(row));
          row.clear();
        }
        field_started = false;
        break;
      default:
        field.push_back(c);
        break;
    }
  }
  if (in_quotes) raise(Errc::ParseError, "unterminated quoted field at end of input");
  if (!field.empty() || field_started || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

Corpus import_flat(const std::filesystem::path& path, const nlohmann::json& mapping,
                   FlatReport* report) {
  if (!mapping.is_object()) raise(Errc::ConfigError, "mapping config must be a JSON object");
  if (!mapping.contains("text_column") || !mapping["text_column"].is_string()) {
    raise(Errc::ConfigError, "mapping config requires \"text_column\"");
  }
  if (!mapping.contains("rules") || !mapping["rules"].is_array() || mapping["rules"].empty()) {
    raise(Errc::ConfigError, "mapping config requires a non-empty \"rules\" array");
  }
  const std::string text_column = mapping["text_column"].get<std::string>();
  const auto optional_string = [&](const char* key, std::string fallback) {
    const auto it = mapping.find(key);
    if (it == mapping.end() || it->is_null()) return fallback;
    if (!it->is_string()) raise(Errc::ConfigError, std::string(key) + " must be a string");
    return it->get<std::string>();
  };
  const std::string id_column = optional_string("id_column", "");
  const std::string source = optional_string("source", path.filename().string());

  struct Rule {
    std::string name;
    std::vector<std::pair<std::string, std::string>> conditions;  // column -> required value
    LabelRecord label;
  };
  std::vector<Rule> rules;
  for (const auto& rule_json : mapping["rules"]) {
    Rule rule;
    rule.name = rule_json.value("name", "rule" + std::to_string(rules.size()));
    if (!rule_json.contains("when") || !rule_json["when"].is_object() ||
        rule_json["when"].empty()) {
      raise(Errc::ConfigError, "rule \"" + rule.name + "\" requires a non-empty \"when\" object");
    }
    for (const auto& [column, value] : rule_json["when"].items()) {
      rule.conditions.emplace_back(column,
                                   value.is_string() ? value.get<std::string>() : value.dump());
    }
    if (!rule_json.contains("label")) {
      raise(Errc::ConfigError, "rule \"" + rule.name + "\" requires a \"label\" record");
    }
    rule.label = record_from_json(rule_json["label"]);
    rules.push_back(std::move(rule));
  }

  auto in = open_or_raise(path);
  const auto rows = parse_csv(in);
  if (rows.empty()) raise(Errc::ParseError, "empty CSV file " + path.string());
  const auto& header = rows.front();
  const auto column_index = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      raise(Errc::ParseError, "CSV has no column \"" + name + "\"");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t text_idx = column_index(text_column);
  const std::size_t id_idx = id_column.empty() ? 0 : column_index(id_column);

  // column index -> required value, resolved once against the header
  std::vector<std::vector<std::pair<std::size_t, std::string>>> rule_conditions;
  for (const auto& rule : rules) {
    std::vector<std::pair<std::size_t, std::string>> resolved;
    for (const auto& [column, value] : rule.conditions) {
      resolved.emplace_back(column_index(column), value);
    }
    rule_conditions.push_back(std::move(resolved));
  }

  std::vector<std::size_t> rule_counts(rules.size(), 0);
  Corpus corpus;
  corpus.provenance = source;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      raise(Errc::ParseError, "row " + std::to_string(r + 1) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(row.size()));
    }
    const Rule* matched = nullptr;
    for (std::size_t ri = 0; ri < rules.size(); ++ri) {
      const bool hit = std::all_of(
          rule_conditions[ri].begin(), rule_conditions[ri].end(),
          [&](const auto& cond) { return row[cond.first] == cond.second; });
      if (hit) {
        matched = &rules[ri];
        break;
      }
    }
    if (matched == nullptr) {
      raise(Errc::UnmappedClass, "row " + std::to_string(r + 1) + " matches no mapping rule");
    }
    rule_counts[static_cast<std::size_t>(matched - rules.data())]++;

    const std::string block_id =
        id_column.empty() ? "row" + std::to_string(r) : row[id_idx];
    // Flat rows carry no timestamps; file order stands in for them.
    const RawComment comment{block_id + "#c", row[text_idx],
                             static_cast<std::int64_t>(r - 1), std::nullopt};
    ThreadBlock block = build_thread_block(block_id, std::span(&comment, 1), source, true);
    corpus.gold.emplace(GoldKey{block.block_id(), Coordinate{1, 1}}, matched->label);
    corpus.blocks.push_back(std::move(block));
  }

  if (report != nullptr) {
    report->rows = rows.size() - 1;
    report->categories.clear();
    for (std::size_t i = 0; i < rules.size(); ++i) {
      report->categories.push_back(
          {rules[i].name, rule_counts[i],
           report->rows == 0
               ? 0.0
               : 100.0 * static_cast<double>(rule_counts[i]) / static_cast<double>(report->rows)});
    }
  }
  return corpus;
}

void enforce_limits(const Corpus& corpus, int max_depth, std::size_t max_nodes) {
  for (const auto& block : corpus.blocks) {
    if (block.nodes().size() > max_nodes) {
      raise(Errc::ValidationError, "block " + block.block_id() + " has " +
                                       std::to_string(block.nodes().size()) +
                                       " comments, above the limit of " +
                                       std::to_string(max_nodes));
    }
    if (block.max_level() > max_depth) {
      raise(Errc::ValidationError, "block " + block.block_id() + " reaches depth " +
                                       std::to_string(block.max_level()) +
                                       ", above the limit of " + std::to_string(max_depth));
    }
  }
}

}  // namespace attackdet
