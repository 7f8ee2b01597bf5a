#include <fstream>
#include <thread>

#include "doctest.h"
#include "elkb/errors.hpp"
#include "elkb/pipeline.hpp"
#include "elkb/service.hpp"
#include "elkb/synth.hpp"
#include "httplib.h"
#include "nlohmann/json.hpp"
#include "support/fixtures.hpp"

using namespace elkb;
using elkb::test::TempDir;
using nlohmann::json;

namespace {

struct PipelineFixture {
  TempDir dir;
  synth::Benchmark bm;
  std::unique_ptr<KbReader> kb;
  LexIndex index;
  Gazetteer gazetteer;
  std::unique_ptr<StubEncoder> encoder;
  std::unique_ptr<Linker> linker;

  explicit PipelineFixture(synth::Benchmark benchmark, const std::string& tag)
      : dir("pipe_" + tag), bm(std::move(benchmark)) {
    synth::build_kb_direct(bm, dir.path() / "kb");
    synth::write_alias_tsv(bm, dir / "alias.tsv");
    kb = std::make_unique<KbReader>(dir.path() / "kb");
    index = build_index(*kb);
    gazetteer = build_gazetteer(*kb, dir / "alias.tsv");
    encoder = std::make_unique<StubEncoder>(bm.dim);
    linker = std::make_unique<Linker>(LinkerDeps{kb.get(), &index, &gazetteer, encoder.get()});
  }

  std::string qid_of(const MentionLink& link) const {
    REQUIRE(!link.nil);
    REQUIRE(link.entity.has_value());
    REQUIRE(link.entity->wikidata_qid.has_value());
    return *link.entity->wikidata_qid;
  }
};

PipelineFixture make_homonym(size_t pairs = 10) {
  return PipelineFixture(synth::make_homonym_fixture(pairs, 32, 1234), "homonym");
}

PipelineFixture make_regular() {
  synth::BenchmarkSpec spec;
  spec.seed = 808;
  spec.n_entities = 120;
  spec.n_gold = 12;
  spec.dim = 32;
  return PipelineFixture(synth::make_benchmark(spec), "regular");
}

}  // namespace

TEST_CASE("context disambiguates a lexically misleading mention") {
  PipelineFixture fx = make_homonym();
  LinkerConfig cfg;
  cfg.echo_candidates = 250;
  for (size_t i = 0; i < fx.bm.gold.size(); ++i) {
    const auto& row = fx.bm.gold[i];
    LinkResult result = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, cfg);
    REQUIRE(result.mentions.size() == 1);
    CHECK(fx.qid_of(result.mentions[0]) == row.qid);

    // The chosen entity always comes from the retrieval candidate list.
    bool member = false;
    for (const auto& c : result.mentions[0].candidates)
      if (c.entity_id == result.mentions[0].entity->id) member = true;
    CHECK(member);
  }
}

TEST_CASE("mmq_only takes the lexical rank-1 regardless of context") {
  PipelineFixture fx = make_homonym();
  LinkerConfig cfg;
  cfg.mode = RetrievalMode::mmq_only;
  size_t correct = 0;
  for (const auto& row : fx.bm.gold) {
    LinkResult result = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, cfg);
    REQUIRE(result.mentions.size() == 1);
    const MentionLink& link = result.mentions[0];
    CHECK(link.provenance == "mmq_only");
    if (fx.qid_of(link) == row.qid) ++correct;

    // Exact agreement with multi_match rank-1.
    QuerySpec q;
    q.query_text = link.mention.surface;
    auto lex = multi_match(fx.index, q);
    REQUIRE(!lex.empty());
    CHECK(link.entity->id == lex.front().entity_id);
    CHECK(link.score == lex.front().score);
  }
  // Half the pairs are lexically misleading by construction.
  CHECK(correct == fx.bm.gold.size() / 2);
}

TEST_CASE("detect path and span path agree on the same fixture") {
  PipelineFixture fx = make_regular();
  LinkerConfig cfg;
  for (const auto& row : fx.bm.gold) {
    LinkResult via_detect = fx.linker->link_text(row.text, cfg);
    LinkResult via_spans = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, cfg);
    REQUIRE(via_detect.mentions.size() == 1);
    REQUIRE(via_spans.mentions.size() == 1);
    CHECK(via_detect.mentions[0].mention.start == via_spans.mentions[0].mention.start);
    CHECK(via_detect.mentions[0].mention.end == via_spans.mentions[0].mention.end);
    CHECK(via_detect.mentions[0].entity->id == via_spans.mentions[0].entity->id);
    CHECK(via_detect.mentions[0].score == via_spans.mentions[0].score);
  }
}

TEST_CASE("pipeline result equals a stage-by-stage replay") {
  PipelineFixture fx = make_regular();
  LinkerConfig cfg;
  for (const auto& row : fx.bm.gold) {
    LinkResult result = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, cfg);
    REQUIRE(result.mentions.size() == 1);
    const MentionLink& link = result.mentions[0];

    // Replay: multi_match on the surface, dot products, argmax.
    QuerySpec q;
    q.query_text = link.mention.surface;
    q.top_k = cfg.top_k;
    auto candidates = multi_match(fx.index, q);
    auto ctx = fx.encoder->encode(row.text, row.start, row.end);
    uint64_t best_id = 0;
    double best_score = -1e300;
    for (const auto& c : candidates) {
      double s = dot(ctx, fx.kb->get_embedding(c.entity_id));
      if (s > best_score || (s == best_score && c.entity_id < best_id)) {
        best_score = s;
        best_id = c.entity_id;
      }
    }
    CHECK(link.entity->id == best_id);
    CHECK(link.score == best_score);
  }
}

TEST_CASE("utterance with no detectable mention links nothing") {
  PipelineFixture fx = make_regular();
  LinkResult result = fx.linker->link_text("nothing to see here whatsoever", {});
  CHECK(result.mentions.empty());
  CHECK(result.timing.total_ms >= 0.0);
}

TEST_CASE("zero-candidate and empty-query mentions become NIL entries") {
  PipelineFixture fx = make_regular();

  // A span over punctuation tokenizes to nothing.
  LinkResult r1 = fx.linker->link_with_spans("... acme words", {{0, 3, ""}}, {});
  REQUIRE(r1.mentions.size() == 1);
  CHECK(r1.mentions[0].nil);
  CHECK(r1.mentions[0].nil_reason == "empty_query");

  // A surface whose tokens appear nowhere in the KB yields no candidates.
  LinkResult r2 = fx.linker->link_with_spans("the zzyzxq thing", {{4, 11, ""}}, {});
  REQUIRE(r2.mentions.size() == 1);
  CHECK(r2.mentions[0].nil);
  CHECK(r2.mentions[0].nil_reason == "no_candidates");
}

TEST_CASE("invalid spans are a request-level error") {
  PipelineFixture fx = make_regular();
  CHECK_THROWS_AS(fx.linker->link_with_spans("short", {{0, 99, ""}}, {}), ValidationError);
  LinkResult empty = fx.linker->link_with_spans("short", {}, {});
  CHECK(empty.mentions.empty());
}

TEST_CASE("link_text is deterministic apart from timings") {
  PipelineFixture fx = make_regular();
  const auto& row = fx.bm.gold[0];
  LinkResult a = fx.linker->link_text(row.text, {});
  LinkResult b = fx.linker->link_text(row.text, {});
  REQUIRE(a.mentions.size() == b.mentions.size());
  for (size_t i = 0; i < a.mentions.size(); ++i) {
    CHECK(a.mentions[i].mention == b.mentions[i].mention);
    CHECK(a.mentions[i].entity->id == b.mentions[i].entity->id);
    CHECK(a.mentions[i].score == b.mentions[i].score);
  }
}

TEST_CASE("stage timings sum to no more than the total") {
  PipelineFixture fx = make_regular();
  const auto& row = fx.bm.gold[1];
  LinkResult r = fx.linker->link_text(row.text, {});
  const StageTimings& t = r.timing;
  CHECK(t.detect_ms + t.retrieve_ms + t.encode_ms + t.rerank_ms <= t.total_ms + 0.1);
  CHECK(t.total_ms > 0.0);
}

TEST_CASE("linking touches at most top_k candidate embeddings") {
  PipelineFixture fx = make_homonym(40);
  LinkerConfig cfg;
  cfg.top_k = 5;
  auto before = fx.kb->io_snapshot();
  const auto& row = fx.bm.gold[0];
  LinkResult r = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, cfg);
  auto after = fx.kb->io_snapshot();
  REQUIRE(r.mentions.size() == 1);
  CHECK(after.vector_bytes - before.vector_bytes <=
        static_cast<uint64_t>(cfg.top_k) * fx.bm.dim * 4);
}

TEST_CASE("retrieval ceiling: with top_k=1 the reranker cannot rescue the gold") {
  PipelineFixture fx = make_homonym();
  LinkerConfig narrow;
  narrow.top_k = 1;
  LinkerConfig wide;
  wide.top_k = 250;
  size_t narrow_correct = 0, wide_correct = 0;
  for (const auto& row : fx.bm.gold) {
    auto a = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, narrow);
    auto b = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, wide);
    if (fx.qid_of(a.mentions[0]) == row.qid) ++narrow_correct;
    if (fx.qid_of(b.mentions[0]) == row.qid) ++wide_correct;
  }
  CHECK(narrow_correct == fx.bm.gold.size() / 2);
  CHECK(wide_correct == fx.bm.gold.size());
}

TEST_CASE("cosine mode retrieves by similarity and tags its provenance") {
  PipelineFixture fx = make_homonym();
  LinkerConfig cfg;
  cfg.mode = RetrievalMode::cosine_knn;
  cfg.top_k = 10;
  const auto& row = fx.bm.gold[0];
  LinkResult r = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, cfg);
  REQUIRE(r.mentions.size() == 1);
  CHECK(r.mentions[0].provenance == "cosine_knn");
  CHECK(fx.qid_of(r.mentions[0]) == row.qid);  // planted vector is the cosine-1 match
}

TEST_CASE("link result JSON carries the documented shape") {
  PipelineFixture fx = make_regular();
  const auto& row = fx.bm.gold[2];
  LinkerConfig cfg;
  cfg.echo_candidates = 3;
  LinkResult r = fx.linker->link_with_spans(row.text, {{row.start, row.end, ""}}, cfg);
  json j = link_result_to_json(r);
  REQUIRE(j.contains("mentions"));
  REQUIRE(j.contains("timing"));
  const json& m = j["mentions"][0];
  for (const char* key : {"start", "end", "surface", "label", "nil", "score", "entity",
                          "candidates", "provenance"})
    CHECK(m.contains(key));
  for (const char* key : {"id", "title", "wikipedia_url", "wikidata_qid", "instance_of"})
    CHECK(m["entity"].contains(key));
  for (const char* key : {"detect_ms", "retrieve_ms", "encode_ms", "rerank_ms", "total_ms"})
    CHECK(j["timing"].contains(key));
}

// ---- service ------------------------------------------------------------------

namespace {

struct ServiceFixture {
  PipelineFixture pipe;
  Service service;
  int port;
  std::shared_ptr<Linker> linker;

  ServiceFixture()
      : pipe(make_regular()),
        service(ServiceConfig{LinkerConfig{}, 64, 512, "1/test"}),
        port(service.start("127.0.0.1", 0)) {
    linker = std::make_shared<Linker>(pipe.linker->deps());
  }
  ~ServiceFixture() { service.stop(); }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(10);
    c.set_read_timeout(30);
    return c;
  }
};

}  // namespace

TEST_CASE("health answers 503 before dependencies and 200 after") {
  ServiceFixture fx;
  auto client = fx.client();

  auto res = client.Get("/health");
  REQUIRE(res);
  CHECK(res->status == 503);

  auto link_res = client.Post("/link", R"({"text":"x"})", "application/json");
  REQUIRE(link_res);
  CHECK(link_res->status == 503);

  fx.service.set_dependencies(fx.linker);
  res = client.Get("/health");
  REQUIRE(res);
  CHECK(res->status == 200);
  json body = json::parse(res->body);
  CHECK(body["status"] == "ok");
  CHECK(body["kb_entities"] == fx.pipe.kb->entity_count());
  CHECK(body["index_version"] == "1/test");
}

TEST_CASE("link endpoint round-trips text and spans") {
  ServiceFixture fx;
  fx.service.set_dependencies(fx.linker);
  auto client = fx.client();
  const auto& row = fx.pipe.bm.gold[0];

  auto res = client.Post("/link", json{{"text", row.text}}.dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  json body = json::parse(res->body);
  REQUIRE(body["mentions"].size() == 1);
  CHECK(body["mentions"][0]["entity"]["wikidata_qid"] == row.qid);

  json with_spans = {{"text", row.text},
                     {"spans", json::array({{{"start", row.start}, {"end", row.end}}})}};
  res = client.Post("/link", with_spans.dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  body = json::parse(res->body);
  REQUIRE(body["mentions"].size() == 1);
  CHECK(body["mentions"][0]["entity"]["wikidata_qid"] == row.qid);

  // Per-request overrides.
  json with_mode = {{"text", row.text}, {"mode", "mmq_only"}, {"top_k", 5}};
  res = client.Post("/link", with_mode.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["mentions"][0]["provenance"] == "mmq_only");
}

TEST_CASE("bad requests get 400 with an error object") {
  ServiceFixture fx;
  fx.service.set_dependencies(fx.linker);
  auto client = fx.client();

  auto res = client.Post("/link", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body).contains("error"));

  res = client.Post("/link", R"({"nope": 1})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);

  json bad_span = {{"text", "short"}, {"spans", json::array({{{"start", 0}, {"end", 99}}})}};
  res = client.Post("/link", bad_span.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);

  res = client.Post("/link", json{{"text", "x"}, {"mode", "warp"}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
}

TEST_CASE("stats reports the rolling latency window") {
  ServiceFixture fx;
  fx.service.set_dependencies(fx.linker);
  auto client = fx.client();
  for (int i = 0; i < 5; ++i)
    client.Post("/link", json{{"text", fx.pipe.bm.gold[0].text}}.dump(), "application/json");
  auto res = client.Get("/stats");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  json body = json::parse(res->body);
  CHECK(body["latency_ms"]["count"].get<uint64_t>() == 5);
  CHECK(body["latency_ms"]["p50_ms"].get<double>() >= 0.0);
  CHECK(body["latency_ms"]["p95_ms"].get<double>() >=
        body["latency_ms"]["p50_ms"].get<double>());
}

TEST_CASE("concurrent requests match their sequential replays") {
  ServiceFixture fx;
  fx.service.set_dependencies(fx.linker);

  // Sequential reference answers.
  std::vector<std::string> texts;
  for (const auto& row : fx.pipe.bm.gold) texts.push_back(row.text);
  std::vector<std::string> expected;
  for (const auto& t : texts) {
    LinkResult r = fx.linker->link_text(t, LinkerConfig{});
    json j = link_result_to_json(r);
    j.erase("timing");
    expected.push_back(j.dump());
  }

  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      auto client = fx.client();
      for (size_t i = t; i < texts.size(); i += 8) {
        for (int rep = 0; rep < 3; ++rep) {
          auto res = client.Post("/link", json{{"text", texts[i]}}.dump(), "application/json");
          if (!res || res->status != 200) {
            ++mismatches;
            continue;
          }
          json j = json::parse(res->body);
          j.erase("timing");
          if (j.dump() != expected[i]) ++mismatches;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(mismatches == 0);
}
