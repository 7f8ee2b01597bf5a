#include "elkb/evalbench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "elkb/common.hpp"
#include "elkb/errors.hpp"
#include "nlohmann/json.hpp"

namespace elkb {

using nlohmann::json;

std::vector<GoldRow> load_gold(const std::filesystem::path& path, GoldLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open gold file: " + path.string());
  std::vector<GoldRow> rows;
  GoldLoadReport local;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      GoldRow row;
      row.text = j.at("text").get<std::string>();
      row.start = j.at("start").get<size_t>();
      row.end = j.at("end").get<size_t>();
      row.qid = j.at("qid").get<std::string>();
      if (row.start >= row.end) throw ValidationError("span start >= end");
      if (!valid_qid(row.qid)) throw ValidationError("malformed qid '" + row.qid + "'");
      rows.push_back(std::move(row));
      ++local.rows_loaded;
    } catch (const std::exception& e) {
      ++local.rows_malformed;
      if (local.sample_errors.size() < 5)
        local.sample_errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (report) *report = local;
  return rows;
}

QidIndex build_qid_index(const KbReader& kb) {
  QidIndex index;
  kb.for_each_record([&](uint32_t, const EntityRecord& rec) {
    if (rec.wikidata_qid) index[*rec.wikidata_qid].push_back(rec.entity_id);
  });
  return index;
}

EvalReport evaluate(const Linker& linker, const LinkerConfig& config,
                    std::span<const GoldRow> gold, const QidIndex& qid_index) {
  EvalReport report;
  report.utterances = gold.size();

  LinkerConfig cfg = config;
  cfg.echo_candidates = config.top_k;  // full candidate echo for recall@K

  size_t correct = 0;
  size_t recall_hits = 0;
  std::vector<double> totals;
  totals.reserve(gold.size());
  StageTimings sums;

  for (const GoldRow& row : gold) {
    std::vector<ExternalSpan> spans = {{row.start, row.end, ""}};
    LinkResult result = linker.link_with_spans(row.text, spans, cfg);
    report.mentions += result.mentions.size();

    const auto it = qid_index.find(row.qid);
    const std::vector<uint64_t>* gold_ids = it == qid_index.end() ? nullptr : &it->second;

    for (const MentionLink& link : result.mentions) {
      if (!link.nil && link.entity && link.entity->wikidata_qid &&
          *link.entity->wikidata_qid == row.qid)
        ++correct;
      if (gold_ids) {
        bool hit = false;
        for (const Candidate& c : link.candidates) {
          if (std::find(gold_ids->begin(), gold_ids->end(), c.entity_id) != gold_ids->end()) {
            hit = true;
            break;
          }
        }
        if (hit) ++recall_hits;
      }
    }

    totals.push_back(result.timing.total_ms);
    sums.detect_ms += result.timing.detect_ms;
    sums.retrieve_ms += result.timing.retrieve_ms;
    sums.encode_ms += result.timing.encode_ms;
    sums.rerank_ms += result.timing.rerank_ms;
    sums.total_ms += result.timing.total_ms;
  }

  size_t n = gold.size();
  if (n > 0) {
    report.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    report.recall_at_k = static_cast<double>(recall_hits) / static_cast<double>(n);
    report.avg_latency_ms = sums.total_ms / static_cast<double>(n);
    report.p50_latency_ms = percentile(totals, 0.5);
    report.p95_latency_ms = percentile(totals, 0.95);
    report.stage_means.detect_ms = sums.detect_ms / static_cast<double>(n);
    report.stage_means.retrieve_ms = sums.retrieve_ms / static_cast<double>(n);
    report.stage_means.encode_ms = sums.encode_ms / static_cast<double>(n);
    report.stage_means.rerank_ms = sums.rerank_ms / static_cast<double>(n);
    report.stage_means.total_ms = report.avg_latency_ms;
  }
  return report;
}

std::vector<SweepRow> k_sweep(const Linker& linker, const LinkerConfig& config,
                              std::span<const GoldRow> gold, const QidIndex& qid_index,
                              const std::vector<uint32_t>& ks, uint32_t repeats) {
  if (ks.empty()) throw ValidationError("k_sweep needs at least one K");
  for (size_t i = 0; i < ks.size(); ++i)
    for (size_t j = i + 1; j < ks.size(); ++j)
      if (ks[i] == ks[j]) throw ValidationError("k_sweep Ks must be distinct");
  if (repeats < 1) repeats = 1;

  std::vector<SweepRow> rows;
  for (uint32_t k : ks) {
    LinkerConfig cfg = config;
    cfg.top_k = k;
    SweepRow row;
    row.k = k;
    std::vector<double> retrieve_means;
    std::vector<double> total_means;
    for (uint32_t r = 0; r < repeats; ++r) {
      EvalReport rep = evaluate(linker, cfg, gold, qid_index);
      if (r == 0) {
        row.recall_at_k = rep.recall_at_k;
        row.accuracy = rep.accuracy;
      }
      retrieve_means.push_back(rep.stage_means.retrieve_ms);
      total_means.push_back(rep.avg_latency_ms);
    }
    row.retrieve_ms_median = median(retrieve_means);
    row.avg_latency_ms = median(total_means);
    rows.push_back(row);
  }
  return rows;
}

AblationResult ablation(const Linker& linker, const LinkerConfig& config,
                        std::span<const GoldRow> gold, const QidIndex& qid_index) {
  AblationResult result;
  LinkerConfig full = config;
  full.mode = RetrievalMode::mmq;
  result.full = evaluate(linker, full, gold, qid_index);
  LinkerConfig only = config;
  only.mode = RetrievalMode::mmq_only;
  result.mmq_only = evaluate(linker, only, gold, qid_index);
  return result;
}

json eval_report_to_json(const EvalReport& r) {
  return {
      {"utterances", r.utterances},
      {"mentions", r.mentions},
      {"accuracy", r.accuracy},
      {"recall_at_k", r.recall_at_k},
      {"avg_latency_ms", r.avg_latency_ms},
      {"p50_latency_ms", r.p50_latency_ms},
      {"p95_latency_ms", r.p95_latency_ms},
      {"stage_means_ms",
       {{"detect", r.stage_means.detect_ms},
        {"retrieve", r.stage_means.retrieve_ms},
        {"encode", r.stage_means.encode_ms},
        {"rerank", r.stage_means.rerank_ms}}},
  };
}

json sweep_to_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"k", r.k},
                   {"recall_at_k", r.recall_at_k},
                   {"accuracy", r.accuracy},
                   {"avg_latency_ms", r.avg_latency_ms},
                   {"retrieve_ms_median", r.retrieve_ms_median}});
  return out;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%6s %12s %10s %16s %20s\n", "K", "recall@K",
                "accuracy", "avg_latency_ms", "retrieve_ms_median");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%6u %12.4f %10.4f %16.3f %20.3f\n", r.k,
                  r.recall_at_k, r.accuracy, r.avg_latency_ms, r.retrieve_ms_median);
    out += buf;
  }
  return out;
}

std::string ablation_table(const AblationResult& result) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-14s %10s %16s\n", "mode", "accuracy",
                "avg_latency_ms");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-14s %10.4f %16.3f\n", "full",
                result.full.accuracy, result.full.avg_latency_ms);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-14s %10.4f %16.3f\n", "mmq_only",
                result.mmq_only.accuracy, result.mmq_only.avg_latency_ms);
  out += buf;
  return out;
}

}  // namespace elkb
