#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "elkb/kb.hpp"
#include "elkb/lex_index.hpp"

namespace elkb {

// Embeds a mention in its utterance context into the KB vector space.
// Implementations are deterministic: same input, bit-identical vector.
class ContextEncoder {
 public:
  virtual ~ContextEncoder() = default;
  virtual std::vector<float> encode(std::string_view utterance, size_t span_start_cp,
                                    size_t span_end_cp) const = 0;
  virtual uint32_t dim() const = 0;
};

// Seeded hash projection of utterance unigrams/bigrams and tagged mention
// tokens into dim buckets, L2-normalized. Content-sensitive stand-in for a
// trained context encoder; fixtures plant entity vectors against it.
class StubEncoder : public ContextEncoder {
 public:
  explicit StubEncoder(uint32_t dim, uint64_t seed = 0x5eedf00dULL);
  std::vector<float> encode(std::string_view utterance, size_t span_start_cp,
                            size_t span_end_cp) const override;
  uint32_t dim() const override { return dim_; }

 private:
  uint32_t dim_;
  uint64_t seed_;
};

// Lookup encoder backed by a JSONL file of
// {utterance, span_start, span_end, vector}. Exact-key lookup, no fallback.
class PrecomputedEncoder : public ContextEncoder {
 public:
  PrecomputedEncoder(const std::filesystem::path& path, uint32_t expected_dim);
  std::vector<float> encode(std::string_view utterance, size_t span_start_cp,
                            size_t span_end_cp) const override;
  uint32_t dim() const override { return dim_; }
  size_t size() const { return table_.size(); }

 private:
  uint32_t dim_;
  std::unordered_map<std::string, std::vector<float>> table_;
};

struct ScoredEntity {
  uint64_t entity_id;
  double score;
};

struct RerankedList {
  std::vector<ScoredEntity> items;  // score descending, entity_id ascending on ties
  std::string provenance;           // retrieval stage: "mmq" | "cosine_knn"
};

// Bi-encoder second stage: dense_score(e) = dot(context, embedding(e)).
// Lexical scores are discarded; ordering is decided by the dense score alone.
RerankedList rerank(std::span<const float> context, const CandidateList& candidates,
                    const KbReader& kb, std::string provenance = "mmq");

// Same scoring over vectors the retrieval stage already fetched;
// vectors[i*dim .. (i+1)*dim) belongs to ids[i].
RerankedList rerank_with_vectors(std::span<const float> context,
                                 const std::vector<uint64_t>& ids,
                                 std::span<const float> vectors,
                                 std::string provenance = "mmq");

// Exact top-k by cosine similarity over the whole KB (the ES_CS baseline
// analog). Zero-norm entity vectors score 0; a zero-norm context is an error.
CandidateList cosine_knn(std::span<const float> context, const KbReader& kb, uint32_t k);

double dot(std::span<const float> a, std::span<const float> b);

}  // namespace elkb
