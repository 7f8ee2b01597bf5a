#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "elkb/pipeline.hpp"
#include "nlohmann/json_fwd.hpp"

namespace elkb {

struct GoldRow {
  std::string text;
  size_t start = 0;
  size_t end = 0;
  std::string qid;
};

struct GoldLoadReport {
  size_t rows_loaded = 0;
  size_t rows_malformed = 0;
  std::vector<std::string> sample_errors;
};

// Gold JSONL: {text, start, end, qid}. Malformed rows are collected, not fatal.
std::vector<GoldRow> load_gold(const std::filesystem::path& path,
                               GoldLoadReport* report = nullptr);

// qid -> entity ids, built with one KB scan; accuracy and recall match on
// the Wikidata QID.
using QidIndex = std::unordered_map<std::string, std::vector<uint64_t>>;
QidIndex build_qid_index(const KbReader& kb);

struct EvalReport {
  size_t utterances = 0;
  size_t mentions = 0;
  double accuracy = 0.0;
  double recall_at_k = 0.0;
  double avg_latency_ms = 0.0;
  double p50_latency_ms = 0.0;
  double p95_latency_ms = 0.0;
  StageTimings stage_means;
};

// Links every gold row through the pipeline (gold span, single mention per
// row) and aggregates accuracy, recall@K and per-stage latency. Accuracy
// fields are deterministic for deterministic encoders.
EvalReport evaluate(const Linker& linker, const LinkerConfig& config,
                    std::span<const GoldRow> gold, const QidIndex& qid_index);

struct SweepRow {
  uint32_t k = 0;
  double recall_at_k = 0.0;
  double accuracy = 0.0;
  double avg_latency_ms = 0.0;
  // Median over repetitions of the per-run mean retrieval latency.
  double retrieve_ms_median = 0.0;
};

// One evaluate per K, everything else fixed. repeats >= 1 controls how many
// timing repetitions feed the medians; accuracy fields come from the first
// run.
std::vector<SweepRow> k_sweep(const Linker& linker, const LinkerConfig& config,
                              std::span<const GoldRow> gold, const QidIndex& qid_index,
                              const std::vector<uint32_t>& ks, uint32_t repeats = 5);

struct AblationResult {
  EvalReport full;      // retrieval + bi-encoder rerank
  EvalReport mmq_only;  // lexical rank-1, rerank stage removed
};

AblationResult ablation(const Linker& linker, const LinkerConfig& config,
                        std::span<const GoldRow> gold, const QidIndex& qid_index);

nlohmann::json eval_report_to_json(const EvalReport& report);
nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows);
std::string sweep_table(const std::vector<SweepRow>& rows);
std::string ablation_table(const AblationResult& result);

}  // namespace elkb
