#include "elkb/lex_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "elkb/common.hpp"
#include "elkb/errors.hpp"
#include "elkb/text.hpp"
#include "elkb/version.hpp"

namespace elkb {

double bm25_field_score(uint32_t tf, uint32_t df, uint32_t doc_count,
                        uint32_t field_len, double avg_len,
                        const Bm25Params& params) {
  if (tf == 0) return 0.0;
  double idf = std::log(1.0 + (static_cast<double>(doc_count) - df + 0.5) / (df + 0.5));
  double norm = avg_len > 0.0 ? static_cast<double>(field_len) / avg_len : 0.0;
  double denom = tf + params.k1 * (1.0 - params.b + params.b * norm);
  return idf * (tf * (params.k1 + 1.0)) / denom;
}

namespace {

void index_field(FieldIndex& field, uint32_t ordinal, const std::string& text) {
  auto tokens = token_texts(text);
  field.lengths.push_back(static_cast<uint32_t>(tokens.size()));
  std::map<std::string, uint32_t> tf;
  for (auto& t : tokens) ++tf[t];
  for (auto& [term, count] : tf)
    field.postings[term].push_back({ordinal, count});
}

void finish_field(FieldIndex& field) {
  uint64_t total = 0;
  for (uint32_t len : field.lengths) total += len;
  field.avg_length = field.lengths.empty()
                         ? 0.0
                         : static_cast<double>(total) / static_cast<double>(field.lengths.size());
}

}  // namespace

LexIndex build_index(const KbReader& kb) {
  LexIndex index;
  index.analyzer_tag = kAnalyzerTag;
  index.doc_count = static_cast<uint32_t>(kb.entity_count());
  index.ordinal_to_id = kb.ids();
  kb.for_each_record([&](uint32_t ordinal, const EntityRecord& rec) {
    index_field(index.title, ordinal, rec.title);
    index_field(index.description, ordinal, rec.description);
  });
  finish_field(index.title);
  finish_field(index.description);
  return index;
}

CandidateList multi_match(const LexIndex& index, const QuerySpec& query) {
  if (query.top_k < 1) throw ValidationError("top_k must be >= 1");
  if (query.title_boost <= 0.0 || query.description_boost <= 0.0)
    throw ValidationError("field boosts must be positive");

  auto tokens = token_texts(query.query_text);
  if (tokens.empty())
    throw EmptyQueryError("query is empty after tokenization: '" + query.query_text + "'");

  struct Sums {
    double title = 0.0;
    double description = 0.0;
  };
  std::unordered_map<uint32_t, Sums> acc;
  acc.reserve(1024);

  auto accumulate = [&](const FieldIndex& field, const std::string& term, bool is_title) {
    auto it = field.postings.find(term);
    if (it == field.postings.end()) return;
    uint32_t df = static_cast<uint32_t>(it->second.size());
    for (const Posting& p : it->second) {
      double s = bm25_field_score(p.tf, df, index.doc_count, field.lengths[p.ordinal],
                                  field.avg_length);
      auto& sums = acc[p.ordinal];
      (is_title ? sums.title : sums.description) += s;
    }
  };

  for (const auto& term : tokens) {
    accumulate(index.title, term, true);
    accumulate(index.description, term, false);
  }

  std::vector<Candidate> scored;
  scored.reserve(acc.size());
  for (const auto& [ordinal, sums] : acc) {
    double st = query.title_boost * sums.title;
    double sd = query.description_boost * sums.description;
    double combined = query.match_type == MatchType::best_fields ? std::max(st, sd) : st + sd;
    scored.push_back({index.ordinal_to_id[ordinal], combined});
  }

  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity_id < b.entity_id;
  };
  size_t k = std::min<size_t>(query.top_k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), better);
  scored.resize(k);
  return scored;
}

// ---- serialization ----------------------------------------------------------

namespace {

constexpr char kIndexMagic[4] = {'E', 'L', 'I', 'X'};

void write_field(std::string& out, const FieldIndex& field) {
  put_f64le(out, field.avg_length);
  put_u32le(out, static_cast<uint32_t>(field.lengths.size()));
  for (uint32_t len : field.lengths) put_u32le(out, len);
  put_u64le(out, field.postings.size());
  for (const auto& [term, postings] : field.postings) {
    put_str(out, term);
    put_u32le(out, static_cast<uint32_t>(postings.size()));
    for (const Posting& p : postings) {
      put_u32le(out, p.ordinal);
      put_u32le(out, p.tf);
    }
  }
}

struct BufReader {
  const std::string& data;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > data.size()) throw FormatError("corrupt index file: truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = get_u32le(data.data() + pos);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = get_u64le(data.data() + pos);
    pos += 8;
    return v;
  }
  double f64() {
    need(8);
    double v = get_f64le(data.data() + pos);
    pos += 8;
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(data.data() + pos, n);
    pos += n;
    return s;
  }
};

void read_field(BufReader& r, FieldIndex& field) {
  field.avg_length = r.f64();
  uint32_t n_lengths = r.u32();
  field.lengths.resize(n_lengths);
  for (uint32_t i = 0; i < n_lengths; ++i) field.lengths[i] = r.u32();
  uint64_t n_terms = r.u64();
  for (uint64_t i = 0; i < n_terms; ++i) {
    std::string term = r.str();
    uint32_t n_postings = r.u32();
    std::vector<Posting> postings(n_postings);
    for (uint32_t j = 0; j < n_postings; ++j) {
      postings[j].ordinal = r.u32();
      postings[j].tf = r.u32();
    }
    field.postings.emplace(std::move(term), std::move(postings));
  }
}

}  // namespace

void save_index(const LexIndex& index, const std::filesystem::path& path) {
  std::string out;
  out.append(kIndexMagic, 4);
  put_u32le(out, kIndexFormatVersion);
  put_str(out, index.analyzer_tag);
  put_u32le(out, index.doc_count);
  for (uint64_t id : index.ordinal_to_id) put_u64le(out, id);
  write_field(out, index.title);
  write_field(out, index.description);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot create index file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw IoError("write failed: " + path.string());
}

LexIndex load_index(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open index file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  BufReader r{data};
  r.need(8);
  if (std::memcmp(data.data(), kIndexMagic, 4) != 0)
    throw FormatError("corrupt index file: bad magic");
  r.pos = 4;
  uint32_t version = r.u32();
  if (version != kIndexFormatVersion)
    throw FormatError("index format version mismatch: file has " + std::to_string(version) +
                      ", expected " + std::to_string(kIndexFormatVersion));

  LexIndex index;
  index.analyzer_tag = r.str();
  if (index.analyzer_tag != kAnalyzerTag)
    throw FormatError("analyzer version mismatch: index built with '" + index.analyzer_tag +
                      "', this build expects '" + kAnalyzerTag + "'");
  index.doc_count = r.u32();
  index.ordinal_to_id.resize(index.doc_count);
  for (uint32_t i = 0; i < index.doc_count; ++i) index.ordinal_to_id[i] = r.u64();
  read_field(r, index.title);
  read_field(r, index.description);
  if (r.pos != data.size()) throw FormatError("corrupt index file: trailing bytes");
  return index;
}

}  // namespace elkb
