#include "elkb/dense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "elkb/errors.hpp"
#include "elkb/text.hpp"
#include "nlohmann/json.hpp"

namespace elkb {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

// ---- StubEncoder ------------------------------------------------------------

namespace {

uint64_t fnv1a64(std::string_view s, uint64_t seed) {
  uint64_t h = 1469598103934665603ULL ^ seed;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

StubEncoder::StubEncoder(uint32_t dim, uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ValidationError("encoder dim must be positive");
}

std::vector<float> StubEncoder::encode(std::string_view utterance, size_t span_start_cp,
                                       size_t span_end_cp) const {
  std::vector<double> acc(dim_, 0.0);
  auto add = [&](std::string_view feature, double weight) {
    uint64_t h = fnv1a64(feature, seed_);
    size_t bucket = h % dim_;
    double sign = ((h >> 32) & 1) ? -1.0 : 1.0;
    acc[bucket] += sign * weight;
  };

  auto tokens = tokenize(utterance);
  for (size_t i = 0; i < tokens.size(); ++i) {
    add("u:" + tokens[i].text, 1.0);
    if (i + 1 < tokens.size()) add("b:" + tokens[i].text + " " + tokens[i + 1].text, 1.0);
    // Tokens overlapping the mention span get a tagged, heavier feature.
    if (tokens[i].start_cp < span_end_cp && tokens[i].end_cp > span_start_cp)
      add("m:" + tokens[i].text, 2.0);
  }

  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  std::vector<float> out(dim_);
  for (size_t i = 0; i < dim_; ++i)
    out[i] = norm > 0.0 ? static_cast<float>(acc[i] / norm) : 0.0f;
  return out;
}

// ---- PrecomputedEncoder -------------------------------------------------------

namespace {

std::string encoding_key(std::string_view utterance, size_t start, size_t end) {
  std::string key(utterance);
  key.push_back('\0');
  key += std::to_string(start);
  key.push_back('\0');
  key += std::to_string(end);
  return key;
}

}  // namespace

PrecomputedEncoder::PrecomputedEncoder(const std::filesystem::path& path,
                                       uint32_t expected_dim)
    : dim_(expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open precomputed encodings: " + path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw FormatError("bad encoding line " + std::to_string(line_no) + ": " + e.what());
    }
    std::vector<float> vec;
    for (const auto& v : j.at("vector")) vec.push_back(v.get<float>());
    if (vec.size() != dim_)
      throw FormatError("encoding line " + std::to_string(line_no) + " has dim " +
                        std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
    table_[encoding_key(j.at("utterance").get<std::string>(),
                        j.at("span_start").get<size_t>(),
                        j.at("span_end").get<size_t>())] = std::move(vec);
  }
}

std::vector<float> PrecomputedEncoder::encode(std::string_view utterance,
                                              size_t span_start_cp,
                                              size_t span_end_cp) const {
  auto it = table_.find(encoding_key(utterance, span_start_cp, span_end_cp));
  if (it == table_.end())
    throw NotFoundError("no precomputed encoding for span [" +
                        std::to_string(span_start_cp) + "," + std::to_string(span_end_cp) +
                        ") of utterance: " + std::string(utterance));
  return it->second;
}

// ---- rerank / cosine_knn ------------------------------------------------------

namespace {

void sort_scored(std::vector<ScoredEntity>& items) {
  std::sort(items.begin(), items.end(), [](const ScoredEntity& a, const ScoredEntity& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity_id < b.entity_id;
  });
}

}  // namespace

RerankedList rerank(std::span<const float> context, const CandidateList& candidates,
                    const KbReader& kb, std::string provenance) {
  if (candidates.empty()) throw ValidationError("rerank requires a non-empty candidate list");
  if (context.size() != kb.embedding_dim())
    throw ValidationError("context dim " + std::to_string(context.size()) +
                          " does not match KB dim " + std::to_string(kb.embedding_dim()));
  RerankedList out;
  out.provenance = std::move(provenance);
  out.items.reserve(candidates.size());
  std::vector<float> emb(kb.embedding_dim());
  for (const Candidate& c : candidates) {
    auto ord = kb.ordinal_of(c.entity_id);
    if (!ord)
      throw NotFoundError("candidate entity id " + std::to_string(c.entity_id) +
                          " has no embedding in this KB");
    kb.embedding_into(*ord, emb.data());
    out.items.push_back({c.entity_id, dot(context, emb)});
  }
  sort_scored(out.items);
  return out;
}

RerankedList rerank_with_vectors(std::span<const float> context,
                                 const std::vector<uint64_t>& ids,
                                 std::span<const float> vectors,
                                 std::string provenance) {
  if (ids.empty()) throw ValidationError("rerank requires a non-empty candidate list");
  size_t dim = context.size();
  if (vectors.size() != ids.size() * dim)
    throw ValidationError("prefetched vector block has wrong size");
  RerankedList out;
  out.provenance = std::move(provenance);
  out.items.reserve(ids.size());
  for (size_t i = 0; i < ids.size(); ++i)
    out.items.push_back({ids[i], dot(context, vectors.subspan(i * dim, dim))});
  sort_scored(out.items);
  return out;
}

CandidateList cosine_knn(std::span<const float> context, const KbReader& kb, uint32_t k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (context.size() != kb.embedding_dim())
    throw ValidationError("context dim does not match KB dim");
  double cnorm = std::sqrt(dot(context, context));
  if (cnorm == 0.0) throw ValidationError("zero-norm context vector");

  const uint32_t dim = kb.embedding_dim();
  const uint64_t count = kb.entity_count();
  std::vector<Candidate> scored;
  scored.reserve(count);
  std::vector<float> emb(dim);
  for (uint64_t ord = 0; ord < count; ++ord) {
    kb.embedding_into(static_cast<uint32_t>(ord), emb.data());
    double enorm = std::sqrt(dot(emb, emb));
    double cos = enorm > 0.0 ? dot(context, emb) / (cnorm * enorm) : 0.0;
    scored.push_back({kb.id_of(static_cast<uint32_t>(ord)), cos});
  }

  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity_id < b.entity_id;
  };
  size_t take = std::min<size_t>(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);
  scored.resize(take);
  return scored;
}

}  // namespace elkb
