#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "elkb/kb.hpp"

namespace elkb {

// One entity-dump line before enrichment.
struct RawEntity {
  std::string title;
  std::string description;
  std::string wikipedia_url;
  std::vector<float> embedding;
  std::optional<uint64_t> entity_id;  // precomputed id wins over the hash
};

struct MappingEntry {
  std::string qid;
  std::vector<std::string> instance_of;
};

// Wikipedia title -> (QID, instance_of) lookup, keys stored normalized.
class WikiMapping {
 public:
  // Underscores to spaces, whitespace runs collapsed, trimmed. Idempotent,
  // case preserved.
  static std::string normalize_title(std::string_view title);

  void insert_first_wins(const std::string& title, MappingEntry entry);
  const MappingEntry* lookup(std::string_view title) const;
  size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, MappingEntry> entries_;
};

struct MappingLoadReport {
  size_t rows_total = 0;
  size_t rows_loaded = 0;
  size_t rows_malformed = 0;
  size_t duplicate_titles = 0;
  std::vector<std::string> sample_errors;  // first few, for diagnostics
};

// Loads the mapping TSV (title<TAB>qid<TAB>instance_of_csv). Malformed rows
// are collected; throws FormatError when more than 10% of rows are malformed.
WikiMapping load_wiki_mapping(const std::filesystem::path& path,
                              MappingLoadReport* report = nullptr);

struct FilterConfig {
  std::set<std::string> banned_types = {"person", "disambiguation", "location"};
  bool drop_unmapped = false;
};

// Fixed-seed SHA-256 of the Wikipedia URL, low 64 bits. Stable across
// rebuilds; collisions abort at build time.
uint64_t stable_entity_id(std::string_view wikipedia_url);

// Enrichment never alters title, description or embedding; absence from the
// mapping is a valid outcome.
EntityRecord resolve_wikidata(const RawEntity& raw, const WikiMapping& mapping);

// Drop iff a banned tag is present, or the record is unmapped while
// drop_unmapped is set.
bool keep_entity(const EntityRecord& record, const FilterConfig& config);

struct BuildReport {
  uint64_t input_lines = 0;
  uint64_t malformed_lines = 0;
  uint64_t resolved_with_qid = 0;
  uint64_t dropped_banned = 0;
  uint64_t dropped_unmapped = 0;
  uint64_t kept = 0;
  KbStats stats;
};

// Offline pipeline: parse the JSONL dump, enrich via the mapping, filter,
// write the KB. Deterministic for identical inputs; a sidecar build.log.json
// with the exact accounting is written next to the KB segments.
BuildReport build_kb(const std::filesystem::path& dump_path,
                     const std::filesystem::path& mapping_path,
                     const FilterConfig& config,
                     const std::filesystem::path& out_path);

}  // namespace elkb
