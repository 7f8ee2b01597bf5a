#pragma once

#include <optional>
#include <string>
#include <vector>

#include "elkb/dense.hpp"
#include "elkb/kb.hpp"
#include "elkb/lex_index.hpp"
#include "elkb/mention.hpp"
#include "nlohmann/json_fwd.hpp"

namespace elkb {

enum class RetrievalMode { mmq, cosine_knn, mmq_only };

const char* retrieval_mode_name(RetrievalMode mode);
std::optional<RetrievalMode> parse_retrieval_mode(std::string_view name);

struct LinkerConfig {
  uint32_t top_k = 250;
  RetrievalMode mode = RetrievalMode::mmq;
  MatchType match_type = MatchType::best_fields;
  double title_boost = 2.0;
  double description_boost = 1.0;
  // Number of retrieval candidates echoed per mention (0 = none).
  uint32_t echo_candidates = 0;
};

struct ChosenEntity {
  uint64_t id = 0;
  std::string title;
  std::string wikipedia_url;
  std::optional<std::string> wikidata_qid;
  std::vector<std::string> instance_of;
};

struct MentionLink {
  Mention mention;
  bool nil = false;
  std::string nil_reason;  // "empty_query" | "no_candidates" when nil
  std::optional<ChosenEntity> entity;
  // Dense dot-product score of the chosen entity; in mmq_only mode this
  // carries the lexical rank-1 score instead.
  double score = 0.0;
  std::string provenance;       // retrieval stage that produced the candidates
  CandidateList candidates;     // echo of the top retrieval candidates
};

struct StageTimings {
  double detect_ms = 0.0;
  double retrieve_ms = 0.0;
  double encode_ms = 0.0;
  double rerank_ms = 0.0;
  double total_ms = 0.0;
};

struct LinkResult {
  std::vector<MentionLink> mentions;
  StageTimings timing;
};

struct LinkerDeps {
  const KbReader* kb = nullptr;
  const LexIndex* index = nullptr;
  const Gazetteer* gazetteer = nullptr;
  const ContextEncoder* encoder = nullptr;
};

// Fig-1 style end-to-end linker: detect -> retrieve candidates (with their
// embeddings) -> encode context -> rerank -> enrich from the KB. Mentions are
// linked independently and sequentially within one call.
class Linker {
 public:
  explicit Linker(LinkerDeps deps);

  LinkResult link_text(std::string_view text, const LinkerConfig& config) const;
  LinkResult link_with_spans(std::string_view text, const std::vector<ExternalSpan>& spans,
                             const LinkerConfig& config) const;

  const LinkerDeps& deps() const { return deps_; }

 private:
  LinkResult link_mentions(std::string_view text, std::vector<Mention> mentions,
                           const LinkerConfig& config, double detect_ms) const;

  LinkerDeps deps_;
};

nlohmann::json link_result_to_json(const LinkResult& result);

}  // namespace elkb
