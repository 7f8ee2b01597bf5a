#include "elkb/ingest.hpp"

#include <openssl/evp.h>

#include <fstream>

#include "elkb/common.hpp"
#include "elkb/errors.hpp"
#include "nlohmann/json.hpp"

namespace elkb {

using nlohmann::json;

// ---- WikiMapping ------------------------------------------------------------

std::string WikiMapping::normalize_title(std::string_view title) {
  std::string out;
  out.reserve(title.size());
  bool pending_space = false;
  for (char c : title) {
    bool is_space = (c == '_' || c == ' ' || c == '\t' || c == '\r' || c == '\n');
    if (is_space) {
      if (!out.empty()) pending_space = true;
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

void WikiMapping::insert_first_wins(const std::string& title, MappingEntry entry) {
  entries_.emplace(title, std::move(entry));
}

const MappingEntry* WikiMapping::lookup(std::string_view title) const {
  auto it = entries_.find(normalize_title(title));
  return it == entries_.end() ? nullptr : &it->second;
}

WikiMapping load_wiki_mapping(const std::filesystem::path& path,
                              MappingLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mapping file: " + path.string());

  WikiMapping mapping;
  MappingLoadReport local;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.rows_total;

    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }

    auto reject = [&](const std::string& why) {
      ++local.rows_malformed;
      if (local.sample_errors.size() < 5)
        local.sample_errors.push_back("row " + std::to_string(local.rows_total) + ": " + why);
    };

    if (cols.size() < 3) {
      reject("expected 3+ tab-separated columns, got " + std::to_string(cols.size()));
      continue;
    }
    std::string title = WikiMapping::normalize_title(cols[0]);
    if (title.empty()) {
      reject("empty title");
      continue;
    }
    if (!valid_qid(cols[1])) {
      reject("invalid QID '" + cols[1] + "'");
      continue;
    }

    MappingEntry entry;
    entry.qid = cols[1];
    const std::string& csv = cols[2];
    size_t pos = 0;
    while (pos <= csv.size() && !csv.empty()) {
      size_t comma = csv.find(',', pos);
      std::string tag = csv.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos);
      if (!tag.empty()) entry.instance_of.push_back(tag);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }

    size_t before = mapping.size();
    mapping.insert_first_wins(title, std::move(entry));
    if (mapping.size() == before)
      ++local.duplicate_titles;  // first row wins, later rows counted
    else
      ++local.rows_loaded;
  }

  if (local.rows_total > 0 &&
      local.rows_malformed * 10 > local.rows_total)
    throw FormatError("mapping file rejected: " + std::to_string(local.rows_malformed) +
                      " of " + std::to_string(local.rows_total) + " rows malformed (>10%)");

  if (report) *report = local;
  return mapping;
}

// ---- resolve / filter -------------------------------------------------------

uint64_t stable_entity_id(std::string_view wikipedia_url) {
  static constexpr char kSeed[] = "elkb.id.v1:";
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, kSeed, sizeof(kSeed) - 1);
  EVP_DigestUpdate(ctx, wikipedia_url.data(), wikipedia_url.size());
  EVP_DigestFinal_ex(ctx, digest, &digest_len);
  EVP_MD_CTX_free(ctx);
  return get_u64le(reinterpret_cast<const char*>(digest));
}

EntityRecord resolve_wikidata(const RawEntity& raw, const WikiMapping& mapping) {
  EntityRecord rec;
  rec.entity_id = raw.entity_id ? *raw.entity_id : stable_entity_id(raw.wikipedia_url);
  rec.title = raw.title;
  rec.description = raw.description;
  rec.wikipedia_url = raw.wikipedia_url;
  rec.embedding_dim = static_cast<uint32_t>(raw.embedding.size());
  if (const MappingEntry* m = mapping.lookup(raw.title)) {
    rec.wikidata_qid = m->qid;
    rec.instance_of = m->instance_of;
  }
  return rec;
}

bool keep_entity(const EntityRecord& record, const FilterConfig& config) {
  for (const auto& tag : record.instance_of)
    if (config.banned_types.count(tag)) return false;
  if (config.drop_unmapped && !record.wikidata_qid) return false;
  return true;
}

// ---- build_kb ---------------------------------------------------------------

namespace {

RawEntity parse_dump_line(const std::string& line) {
  json j = json::parse(line);
  if (!j.is_object()) throw FormatError("dump line is not an object");
  RawEntity raw;
  raw.title = j.at("title").get<std::string>();
  raw.description = j.value("description", std::string());
  raw.wikipedia_url = j.at("wikipedia_url").get<std::string>();
  const auto& emb = j.at("embedding");
  if (!emb.is_array()) throw FormatError("embedding is not an array");
  raw.embedding.reserve(emb.size());
  for (const auto& v : emb) raw.embedding.push_back(v.get<float>());
  if (raw.title.empty()) throw FormatError("title is empty");
  if (raw.embedding.empty()) throw FormatError("embedding is empty");
  if (j.contains("entity_id")) raw.entity_id = j.at("entity_id").get<uint64_t>();
  return raw;
}

}  // namespace

BuildReport build_kb(const std::filesystem::path& dump_path,
                     const std::filesystem::path& mapping_path,
                     const FilterConfig& config,
                     const std::filesystem::path& out_path) {
  WikiMapping mapping = load_wiki_mapping(mapping_path);

  std::ifstream in(dump_path);
  if (!in) throw IoError("cannot open dump file: " + dump_path.string());

  BuildReport report;
  std::unique_ptr<KbWriter> writer;
  uint32_t dim = 0;
  std::string line;
  std::vector<std::string> sample_errors;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++report.input_lines;
    RawEntity raw;
    try {
      raw = parse_dump_line(line);
    } catch (const std::exception& e) {
      ++report.malformed_lines;
      if (sample_errors.size() < 5)
        sample_errors.push_back("line " + std::to_string(report.input_lines) + ": " + e.what());
      continue;
    }

    if (dim == 0) {
      dim = static_cast<uint32_t>(raw.embedding.size());
      writer = std::make_unique<KbWriter>(out_path, dim);
    } else if (raw.embedding.size() != dim) {
      throw FormatError("embedding dim inconsistency at dump line " +
                        std::to_string(report.input_lines) + ": got " +
                        std::to_string(raw.embedding.size()) + ", expected " +
                        std::to_string(dim));
    }

    EntityRecord rec = resolve_wikidata(raw, mapping);
    if (rec.wikidata_qid) ++report.resolved_with_qid;
    bool banned = false;
    for (const auto& tag : rec.instance_of)
      if (config.banned_types.count(tag)) banned = true;
    if (banned) {
      ++report.dropped_banned;
      continue;
    }
    if (config.drop_unmapped && !rec.wikidata_qid) {
      ++report.dropped_unmapped;
      continue;
    }
    std::span<const float> emb(raw.embedding);
    writer->put(std::move(rec), emb);
    ++report.kept;
  }

  if (report.input_lines > 0 && report.malformed_lines * 100 > report.input_lines) {
    std::string detail;
    for (const auto& s : sample_errors) detail += "\n  " + s;
    throw FormatError("dump rejected: " + std::to_string(report.malformed_lines) + " of " +
                      std::to_string(report.input_lines) + " lines malformed (>1%)" + detail);
  }
  if (!writer) writer = std::make_unique<KbWriter>(out_path, 1);  // empty dump, minimal dim

  report.stats = writer->finalize();

  json log = {
      {"input_lines", report.input_lines},
      {"malformed_lines", report.malformed_lines},
      {"resolved_with_qid", report.resolved_with_qid},
      {"dropped_banned", report.dropped_banned},
      {"dropped_unmapped", report.dropped_unmapped},
      {"kept", report.kept},
      {"entity_count", report.stats.entity_count},
      {"embedding_dim", report.stats.embedding_dim},
      {"qid_coverage", report.stats.qid_coverage},
      {"sample_errors", sample_errors},
  };
  std::ofstream logout(out_path / "build.log.json", std::ios::trunc);
  logout << log.dump(2) << "\n";

  return report;
}

}  // namespace elkb
