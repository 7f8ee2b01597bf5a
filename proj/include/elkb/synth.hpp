#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "elkb/kb.hpp"

namespace elkb::synth {

struct SynthEntity {
  std::string title;
  std::string description;
  std::string wikipedia_url;
  std::string qid;  // empty -> left out of the mapping file
  std::vector<std::string> instance_of;
  std::vector<float> embedding;
  uint64_t entity_id = 0;
};

struct GoldUtterance {
  std::string text;
  size_t start = 0;  // codepoint span of the mention
  size_t end = 0;
  std::string qid;
};

struct Benchmark {
  uint32_t dim = 64;
  std::vector<SynthEntity> entities;
  std::vector<GoldUtterance> gold;
  // mention surface -> label rows for the gazetteer alias file
  std::vector<std::pair<std::string, std::string>> aliases;
};

struct BenchmarkSpec {
  uint64_t seed = 42;
  size_t n_entities = 10000;
  size_t n_gold = 200;
  uint32_t dim = 64;
  // Gold rows whose entity is lexically crowded out of the top 100 (resp.
  // 250) but inside the top 250 (resp. 500); exercises the K sweep.
  size_t crowded_past_100 = 0;
  size_t crowded_past_250 = 0;
  uint64_t encoder_seed = 0x5eedf00dULL;
};

// Seeded synthetic benchmark. Entity names come from a product/organization
// word pool, descriptions share vocabulary to create lexical ambiguity, and
// each gold entity's embedding is planted as the stub encoder's encoding of
// its gold utterance, so context genuinely disambiguates. Deterministic for
// a fixed spec.
Benchmark make_benchmark(const BenchmarkSpec& spec);

// Homonym pairs for the ablation analog: every pair shares a mention token;
// for misleading pairs the decoy out-scores the gold lexically (exact short
// title) while the planted embeddings make the reranker prefer the gold.
Benchmark make_homonym_fixture(size_t n_pairs, uint32_t dim, uint64_t seed,
                               double misleading_rate = 0.5);

// Dump where exactly half the entities carry a banned type tag.
Benchmark make_filter_dump(size_t n_entities, uint32_t dim, uint64_t seed);

// Random retrieval queries over the benchmark vocabulary (1-3 tokens, with
// an occasional out-of-vocabulary token).
std::vector<std::string> sample_queries(const Benchmark& bm, size_t n, uint64_t seed);

void write_dump_jsonl(const Benchmark& bm, const std::filesystem::path& path);
void write_mapping_tsv(const Benchmark& bm, const std::filesystem::path& path);
void write_gold_jsonl(const Benchmark& bm, const std::filesystem::path& path);
void write_alias_tsv(const Benchmark& bm, const std::filesystem::path& path);

// Writes the KB directly through KbWriter (no JSONL round trip); ids are
// assigned with the same stable hash the ingest path uses.
KbStats build_kb_direct(const Benchmark& bm, const std::filesystem::path& dir);

}  // namespace elkb::synth
