#include "elkb/pipeline.hpp"

#include "elkb/common.hpp"
#include "elkb/errors.hpp"
#include "elkb/text.hpp"
#include "nlohmann/json.hpp"

namespace elkb {

const char* retrieval_mode_name(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::mmq: return "mmq";
    case RetrievalMode::cosine_knn: return "cosine_knn";
    default: return "mmq_only";
  }
}

std::optional<RetrievalMode> parse_retrieval_mode(std::string_view name) {
  if (name == "mmq") return RetrievalMode::mmq;
  if (name == "cosine_knn") return RetrievalMode::cosine_knn;
  if (name == "mmq_only") return RetrievalMode::mmq_only;
  return std::nullopt;
}

Linker::Linker(LinkerDeps deps) : deps_(deps) {
  if (!deps_.kb || !deps_.index || !deps_.gazetteer || !deps_.encoder)
    throw ValidationError("Linker requires kb, index, gazetteer and encoder");
  if (deps_.encoder->dim() != deps_.kb->embedding_dim())
    throw ValidationError("encoder dim " + std::to_string(deps_.encoder->dim()) +
                          " does not match KB dim " +
                          std::to_string(deps_.kb->embedding_dim()));
  if (deps_.index->doc_count != deps_.kb->entity_count())
    throw ValidationError("index doc count does not match KB entity count");
}

LinkResult Linker::link_text(std::string_view text, const LinkerConfig& config) const {
  StopWatch detect_watch;
  std::vector<Mention> mentions = detect(text, *deps_.gazetteer);
  double detect_ms = detect_watch.ms();
  return link_mentions(text, std::move(mentions), config, detect_ms);
}

LinkResult Linker::link_with_spans(std::string_view text,
                                   const std::vector<ExternalSpan>& spans,
                                   const LinkerConfig& config) const {
  StopWatch detect_watch;
  std::vector<Mention> mentions = from_external_spans(text, spans);
  double detect_ms = detect_watch.ms();
  return link_mentions(text, std::move(mentions), config, detect_ms);
}

LinkResult Linker::link_mentions(std::string_view text, std::vector<Mention> mentions,
                                 const LinkerConfig& config, double detect_ms) const {
  if (config.top_k < 1) throw ValidationError("top_k must be >= 1");
  StopWatch total_watch;
  LinkResult result;
  result.timing.detect_ms = detect_ms;
  const KbReader& kb = *deps_.kb;
  const uint32_t dim = kb.embedding_dim();

  for (Mention& mention : mentions) {
    MentionLink link;
    link.mention = std::move(mention);
    link.provenance = retrieval_mode_name(config.mode);

    CandidateList candidates;
    std::vector<uint64_t> candidate_ids;
    std::vector<float> candidate_vectors;
    std::vector<float> context;

    if (config.mode == RetrievalMode::cosine_knn) {
      // The CS baseline needs the context vector to retrieve at all.
      StopWatch encode_watch;
      context = deps_.encoder->encode(text, link.mention.start, link.mention.end);
      result.timing.encode_ms += encode_watch.ms();
      double norm2 = dot(context, context);
      if (norm2 == 0.0) {
        link.nil = true;
        link.nil_reason = "empty_query";
        result.mentions.push_back(std::move(link));
        continue;
      }
      StopWatch retrieve_watch;
      candidates = cosine_knn(context, kb, config.top_k);
      result.timing.retrieve_ms += retrieve_watch.ms();
    } else {
      StopWatch retrieve_watch;
      QuerySpec spec;
      spec.query_text = link.mention.surface;
      spec.title_boost = config.title_boost;
      spec.description_boost = config.description_boost;
      spec.match_type = config.match_type;
      spec.top_k = config.top_k;
      try {
        candidates = multi_match(*deps_.index, spec);
      } catch (const EmptyQueryError&) {
        link.nil = true;
        link.nil_reason = "empty_query";
        result.mentions.push_back(std::move(link));
        continue;
      }
      if (config.mode == RetrievalMode::mmq && !candidates.empty()) {
        // Candidates come back with their embeddings (top-K-only loading).
        candidate_ids.reserve(candidates.size());
        candidate_vectors.resize(candidates.size() * static_cast<size_t>(dim));
        for (size_t i = 0; i < candidates.size(); ++i) {
          auto ord = kb.ordinal_of(candidates[i].entity_id);
          if (!ord)
            throw NotFoundError("candidate entity id " +
                                std::to_string(candidates[i].entity_id) +
                                " has no embedding in this KB");
          kb.embedding_into(*ord, candidate_vectors.data() + i * dim);
          candidate_ids.push_back(candidates[i].entity_id);
        }
      }
      result.timing.retrieve_ms += retrieve_watch.ms();
    }

    if (candidates.empty()) {
      link.nil = true;
      link.nil_reason = "no_candidates";
      result.mentions.push_back(std::move(link));
      continue;
    }
    if (config.echo_candidates > 0) {
      size_t n = std::min<size_t>(config.echo_candidates, candidates.size());
      link.candidates.assign(candidates.begin(), candidates.begin() + n);
    }

    uint64_t chosen_id = 0;
    if (config.mode == RetrievalMode::mmq_only) {
      // Table-4 ablation: lexical rank-1, no encoding or rerank.
      chosen_id = candidates.front().entity_id;
      link.score = candidates.front().score;
    } else {
      if (config.mode == RetrievalMode::mmq) {
        StopWatch encode_watch;
        context = deps_.encoder->encode(text, link.mention.start, link.mention.end);
        result.timing.encode_ms += encode_watch.ms();
      }
      StopWatch rerank_watch;
      RerankedList reranked;
      if (!candidate_ids.empty()) {
        reranked = rerank_with_vectors(context, candidate_ids, candidate_vectors,
                                       link.provenance);
      } else {
        reranked = rerank(context, candidates, kb, link.provenance);
      }
      result.timing.rerank_ms += rerank_watch.ms();
      chosen_id = reranked.items.front().entity_id;
      link.score = reranked.items.front().score;
    }

    EntityRecord rec = kb.get_entity(chosen_id);
    ChosenEntity chosen;
    chosen.id = rec.entity_id;
    chosen.title = std::move(rec.title);
    chosen.wikipedia_url = std::move(rec.wikipedia_url);
    chosen.wikidata_qid = std::move(rec.wikidata_qid);
    chosen.instance_of = std::move(rec.instance_of);
    link.entity = std::move(chosen);
    result.mentions.push_back(std::move(link));
  }

  result.timing.total_ms = total_watch.ms() + detect_ms;
  return result;
}

nlohmann::json link_result_to_json(const LinkResult& result) {
  nlohmann::json mentions = nlohmann::json::array();
  for (const auto& link : result.mentions) {
    nlohmann::json m = {
        {"start", link.mention.start},
        {"end", link.mention.end},
        {"surface", link.mention.surface},
        {"label", label_name(link.mention.label)},
        {"nil", link.nil},
        {"provenance", link.provenance},
    };
    if (link.nil) {
      m["nil_reason"] = link.nil_reason;
    } else {
      m["score"] = link.score;
      const ChosenEntity& e = *link.entity;
      nlohmann::json ej = {
          {"id", e.id},
          {"title", e.title},
          {"wikipedia_url", e.wikipedia_url},
          {"instance_of", e.instance_of},
      };
      ej["wikidata_qid"] = e.wikidata_qid ? nlohmann::json(*e.wikidata_qid)
                                          : nlohmann::json(nullptr);
      m["entity"] = std::move(ej);
    }
    if (!link.candidates.empty()) {
      nlohmann::json cands = nlohmann::json::array();
      for (const auto& c : link.candidates)
        cands.push_back({{"id", c.entity_id}, {"score", c.score}});
      m["candidates"] = std::move(cands);
    }
    mentions.push_back(std::move(m));
  }
  return {
      {"mentions", std::move(mentions)},
      {"timing",
       {{"detect_ms", result.timing.detect_ms},
        {"retrieve_ms", result.timing.retrieve_ms},
        {"encode_ms", result.timing.encode_ms},
        {"rerank_ms", result.timing.rerank_ms},
        {"total_ms", result.timing.total_ms}}},
  };
}

}  // namespace elkb
