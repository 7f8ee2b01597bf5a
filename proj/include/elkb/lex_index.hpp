#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "elkb/kb.hpp"

namespace elkb {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Okapi BM25 with the Lucene idf variant: ln(1 + (N - df + 0.5)/(df + 0.5)).
// Never negative. avg_len == 0 is treated as norm 0.
double bm25_field_score(uint32_t tf, uint32_t df, uint32_t doc_count,
                        uint32_t field_len, double avg_len,
                        const Bm25Params& params = {});

struct Posting {
  uint32_t ordinal;
  uint32_t tf;
};

struct FieldIndex {
  // term -> postings sorted by ordinal (std::map keeps serialization sorted)
  std::map<std::string, std::vector<Posting>> postings;
  std::vector<uint32_t> lengths;  // token count per ordinal
  double avg_length = 0.0;        // exact mean of lengths
};

enum class MatchType { best_fields, most_fields };

struct QuerySpec {
  std::string query_text;
  double title_boost = 2.0;
  double description_boost = 1.0;
  MatchType match_type = MatchType::best_fields;
  uint32_t top_k = 250;
};

struct Candidate {
  uint64_t entity_id;
  double score;
};
using CandidateList = std::vector<Candidate>;

struct LexIndex {
  uint32_t doc_count = 0;
  std::string analyzer_tag;
  std::vector<uint64_t> ordinal_to_id;
  FieldIndex title;
  FieldIndex description;
};

// Indexes every entity's title and description fields. Deterministic: the
// same KB yields a byte-identical serialized index.
LexIndex build_index(const KbReader& kb);

// Elasticsearch multi_match analog. Per field f the score is
// boost_f * sum over query tokens of bm25_field_score; best_fields combines
// with max over fields, most_fields with the sum. Entities matching no query
// token are excluded. Ordering: score descending, entity_id ascending.
// Throws EmptyQueryError when the query tokenizes to nothing.
CandidateList multi_match(const LexIndex& index, const QuerySpec& query);

void save_index(const LexIndex& index, const std::filesystem::path& path);
LexIndex load_index(const std::filesystem::path& path);

}  // namespace elkb
