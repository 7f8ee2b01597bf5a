#include <fstream>
#include <random>

#include "doctest.h"
#include "elkb/dense.hpp"
#include "elkb/errors.hpp"
#include "elkb/model_container.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace elkb;
using elkb::test::TempDir;

namespace {

struct VecKb {
  TempDir dir;
  std::unique_ptr<KbReader> kb;
  std::vector<uint64_t> ids;
  std::vector<std::vector<float>> vectors;

  VecKb(const std::vector<std::vector<float>>& vecs, uint32_t dim) : dir("dense_kb") {
    KbWriter writer(dir.path(), dim);
    uint64_t id = 10;
    for (const auto& v : vecs) {
      EntityRecord r;
      r.entity_id = id;
      r.title = "e" + std::to_string(id);
      r.wikipedia_url = "u" + std::to_string(id);
      writer.put(r, v);
      ids.push_back(id);
      vectors.push_back(v);
      id += 10;
    }
    writer.finalize();
    kb = std::make_unique<KbReader>(dir.path());
  }

  CandidateList all_candidates() const {
    CandidateList c;
    for (uint64_t i : ids) c.push_back({i, 0.0});
    return c;
  }
};

std::vector<float> random_vec(uint32_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(dim);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("rerank ranks the aligned basis vector first") {
  VecKb fx({{1.0f, 0.0f}, {0.0f, 1.0f}}, 2);
  std::vector<float> ctx = {1.0f, 0.0f};
  RerankedList out = rerank(ctx, fx.all_candidates(), *fx.kb);
  REQUIRE(out.items.size() == 2);
  CHECK(out.items[0].entity_id == 10);
  CHECK(out.items[0].score == 1.0);
  CHECK(out.items[1].score == 0.0);
  CHECK(out.provenance == "mmq");
}

TEST_CASE("single candidate comes back with its dot product") {
  VecKb fx({{0.5f, 0.25f}}, 2);
  std::vector<float> ctx = {2.0f, 4.0f};
  RerankedList out = rerank(ctx, {{10, 0.0}}, *fx.kb);
  REQUIRE(out.items.size() == 1);
  CHECK(out.items[0].score == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rerank ordering equals brute-force dot sort on random candidates") {
  std::mt19937_64 rng(2024);
  std::vector<std::vector<float>> vecs;
  for (int i = 0; i < 250; ++i) vecs.push_back(random_vec(64, rng));
  VecKb fx(vecs, 64);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> ctx = random_vec(64, rng);
    RerankedList got = rerank(ctx, fx.all_candidates(), *fx.kb);
    auto want = test::oracle_dot_rank(ctx, fx.ids, fx.vectors);
    REQUIRE(got.items.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) {
      CHECK(got.items[i].entity_id == want[i].first);
      CHECK(got.items[i].score == doctest::Approx(want[i].second).epsilon(1e-9));
    }
  }
}

TEST_CASE("rerank_with_vectors matches the KB-fetching path") {
  std::mt19937_64 rng(7);
  std::vector<std::vector<float>> vecs;
  for (int i = 0; i < 40; ++i) vecs.push_back(random_vec(16, rng));
  VecKb fx(vecs, 16);
  std::vector<float> ctx = random_vec(16, rng);

  std::vector<float> flat;
  for (const auto& v : vecs) flat.insert(flat.end(), v.begin(), v.end());
  RerankedList a = rerank(ctx, fx.all_candidates(), *fx.kb, "mmq");
  RerankedList b = rerank_with_vectors(ctx, fx.ids, flat, "mmq");
  REQUIRE(a.items.size() == b.items.size());
  for (size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].entity_id == b.items[i].entity_id);
    CHECK(a.items[i].score == b.items[i].score);
  }
}

TEST_CASE("rerank error paths") {
  VecKb fx({{1.0f, 0.0f}}, 2);
  std::vector<float> ctx = {1.0f, 0.0f};
  CHECK_THROWS_AS(rerank(ctx, {}, *fx.kb), ValidationError);
  CHECK_THROWS_WITH_AS(rerank(ctx, {{777, 0.0}}, *fx.kb), doctest::Contains("777"),
                       NotFoundError);
  std::vector<float> wrong_dim = {1.0f, 0.0f, 0.0f};
  CHECK_THROWS_AS(rerank(wrong_dim, fx.all_candidates(), *fx.kb), ValidationError);
}

TEST_CASE("positive scaling of the context leaves the ordering unchanged") {
  std::mt19937_64 rng(99);
  std::vector<std::vector<float>> vecs;
  for (int i = 0; i < 60; ++i) vecs.push_back(random_vec(8, rng));
  VecKb fx(vecs, 8);
  std::vector<float> ctx = random_vec(8, rng);
  RerankedList base = rerank(ctx, fx.all_candidates(), *fx.kb);
  for (float c : {0.25f, 3.0f, 1000.0f}) {
    std::vector<float> scaled = ctx;
    for (auto& v : scaled) v *= c;
    RerankedList out = rerank(scaled, fx.all_candidates(), *fx.kb);
    for (size_t i = 0; i < base.items.size(); ++i)
      CHECK(out.items[i].entity_id == base.items[i].entity_id);
  }
}

TEST_CASE("cosine_knn basics") {
  VecKb fx({{1.0f, 0.0f}, {0.0f, 1.0f}, {0.9f, 0.1f}}, 2);
  std::vector<float> ctx = {1.0f, 0.0f};
  CandidateList top2 = cosine_knn(ctx, *fx.kb, 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0].entity_id == 10);  // self-similarity is maximal
  CHECK(top2[0].score == doctest::Approx(1.0).epsilon(1e-12));

  CandidateList all = cosine_knn(ctx, *fx.kb, 99);
  CHECK(all.size() == 3);  // k >= KB size returns the full KB, sorted
  CHECK(all[0].score >= all[1].score);
  CHECK(all[1].score >= all[2].score);

  std::vector<float> zero = {0.0f, 0.0f};
  CHECK_THROWS_AS(cosine_knn(zero, *fx.kb, 1), ValidationError);
}

TEST_CASE("zero-norm entity vectors score 0 by convention") {
  VecKb fx({{0.0f, 0.0f}, {1.0f, 1.0f}}, 2);
  std::vector<float> ctx = {1.0f, 0.0f};
  CandidateList all = cosine_knn(ctx, *fx.kb, 2);
  REQUIRE(all.size() == 2);
  CHECK(all[1].entity_id == 10);
  CHECK(all[1].score == 0.0);
}

TEST_CASE("cosine_knn equals the brute-force oracle") {
  std::mt19937_64 rng(31337);
  std::vector<std::vector<float>> vecs;
  for (int i = 0; i < 2000; ++i) vecs.push_back(random_vec(16, rng));
  VecKb fx(vecs, 16);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<float> ctx = random_vec(16, rng);
    CandidateList got = cosine_knn(ctx, *fx.kb, 25);
    auto want = test::oracle_cosine_topk(ctx, fx.ids, fx.vectors, 25);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].entity_id == want[i].entity_id);
      CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
    }
  }
}

TEST_CASE("cosine_knn does not depend on insertion order") {
  std::mt19937_64 rng(55);
  std::vector<std::vector<float>> vecs;
  for (int i = 0; i < 100; ++i) vecs.push_back(random_vec(8, rng));
  VecKb forward(vecs, 8);

  // Same content, reversed put order; the writer sorts by id either way.
  TempDir dir("dense_perm");
  {
    KbWriter writer(dir.path(), 8);
    for (size_t i = vecs.size(); i-- > 0;) {
      EntityRecord r;
      r.entity_id = 10 + 10 * i;
      r.title = "e" + std::to_string(r.entity_id);
      r.wikipedia_url = "u" + std::to_string(r.entity_id);
      writer.put(r, vecs[i]);
    }
    writer.finalize();
  }
  KbReader shuffled(dir.path());
  std::vector<float> ctx = random_vec(8, rng);
  CandidateList a = cosine_knn(ctx, *forward.kb, 10);
  CandidateList b = cosine_knn(ctx, shuffled, 10);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].entity_id == b[i].entity_id);
    CHECK(a[i].score == b[i].score);
  }
}

TEST_CASE("stub encoder is deterministic and content-sensitive") {
  StubEncoder enc(32);
  std::string text = "our acme billing subscription renews";
  auto first = enc.encode(text, 4, 8);
  for (int i = 0; i < 1000; ++i) CHECK(enc.encode(text, 4, 8) == first);
  CHECK(first.size() == 32);

  double norm = 0.0;
  for (float v : first) norm += static_cast<double>(v) * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(enc.encode("a completely different sentence", 2, 12) != first);
  CHECK(enc.encode(text, 9, 16) != first);  // span matters
}

TEST_CASE("precomputed encoder is exact-key with no fallback") {
  TempDir dir("dense_pre");
  {
    std::ofstream out(dir / "enc.jsonl");
    out << R"({"utterance":"hello acme","span_start":6,"span_end":10,"vector":[1.0,0.0]})"
        << "\n";
  }
  PrecomputedEncoder enc(dir / "enc.jsonl", 2);
  CHECK(enc.size() == 1);
  auto v = enc.encode("hello acme", 6, 10);
  CHECK(v == std::vector<float>{1.0f, 0.0f});
  CHECK_THROWS_AS(enc.encode("hello acme", 0, 5), NotFoundError);
  CHECK_THROWS_AS(enc.encode("hello acme ", 6, 10), NotFoundError);
}

TEST_CASE("precomputed encoder rejects wrong dims and bad lines") {
  TempDir dir("dense_pre_bad");
  {
    std::ofstream out(dir / "enc.jsonl");
    out << R"({"utterance":"a","span_start":0,"span_end":1,"vector":[1.0,0.0,0.0]})" << "\n";
  }
  CHECK_THROWS_AS(PrecomputedEncoder(dir / "enc.jsonl", 2), FormatError);
  {
    std::ofstream out(dir / "enc.jsonl", std::ios::trunc);
    out << "not json\n";
  }
  CHECK_THROWS_AS(PrecomputedEncoder(dir / "enc.jsonl", 2), FormatError);
}

// ---- model container pruning -------------------------------------------------

namespace {

std::string blob(size_t n, char fill) { return std::string(n, fill); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("pruning a 50/50 container halves the bytes and keeps payloads intact") {
  TempDir dir("prune_half");
  std::vector<TensorEntry> tensors = {
      {"ctx_encoder.weight", blob(1 << 20, 'a')},
      {"cand_encoder.weight", blob(1 << 20, 'b')},
  };
  write_model_container(dir / "model.elwt", tensors);
  PruneReport report = prune_model_artifact(dir / "model.elwt", dir / "pruned.elwt");
  CHECK(report.tensors_kept == 1);
  CHECK(report.tensors_removed == 1);
  double ratio = static_cast<double>(report.bytes_after) / report.bytes_before;
  CHECK(ratio > 0.48);
  CHECK(ratio < 0.52);

  auto kept = read_model_container(dir / "pruned.elwt");
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].name == "ctx_encoder.weight");
  CHECK(kept[0].bytes == tensors[0].bytes);
}

TEST_CASE("prune with no matching tensors is an identity copy") {
  TempDir dir("prune_noop");
  std::vector<TensorEntry> tensors = {{"ctx_a", blob(100, 'x')}, {"ctx_b", blob(50, 'y')}};
  write_model_container(dir / "in.elwt", tensors);
  PruneReport report = prune_model_artifact(dir / "in.elwt", dir / "out.elwt");
  CHECK(report.tensors_removed == 0);
  CHECK(report.tensors_kept == 2);
  CHECK(slurp(dir / "in.elwt") == slurp(dir / "out.elwt"));
}

TEST_CASE("pruning everything is refused") {
  TempDir dir("prune_all");
  write_model_container(dir / "in.elwt", {{"cand_only", blob(10, 'z')}});
  CHECK_THROWS_AS(prune_model_artifact(dir / "in.elwt", dir / "out.elwt"), ValidationError);
}

TEST_CASE("prune is idempotent") {
  TempDir dir("prune_idem");
  write_model_container(dir / "in.elwt", {{"ctx_a", blob(256, 'p')},
                                          {"cand_a", blob(256, 'q')},
                                          {"ctx_b", blob(64, 'r')}});
  prune_model_artifact(dir / "in.elwt", dir / "once.elwt");
  prune_model_artifact(dir / "once.elwt", dir / "twice.elwt");
  CHECK(slurp(dir / "once.elwt") == slurp(dir / "twice.elwt"));
}

TEST_CASE("malformed containers are rejected") {
  TempDir dir("prune_bad");
  std::ofstream(dir / "bad.elwt", std::ios::binary) << "NOPE";
  CHECK_THROWS_AS(read_model_container(dir / "bad.elwt"), FormatError);

  write_model_container(dir / "ok.elwt", {{"ctx_a", blob(64, 'k')}});
  auto size = std::filesystem::file_size(dir / "ok.elwt");
  std::filesystem::resize_file(dir / "ok.elwt", size - 10);
  CHECK_THROWS_AS(read_model_container(dir / "ok.elwt"), FormatError);
}
