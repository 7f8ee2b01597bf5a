#include "elkb/kb.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "elkb/common.hpp"
#include "elkb/errors.hpp"
#include "elkb/version.hpp"

namespace elkb {

namespace {

constexpr char kMagic[4] = {'E', 'L', 'K', 'B'};
constexpr size_t kHeaderSize = 32;

std::string header_path(const std::filesystem::path& dir) { return (dir / "kb.header").string(); }
std::string records_path(const std::filesystem::path& dir) { return (dir / "kb.records").string(); }
std::string vectors_path(const std::filesystem::path& dir) { return (dir / "kb.vectors").string(); }
std::string idmap_path(const std::filesystem::path& dir) { return (dir / "kb.idmap").string(); }

// pread exactly n bytes or throw.
void pread_exact(int fd, void* buf, size_t n, uint64_t offset, const char* what) {
  size_t done = 0;
  auto* p = static_cast<char*>(buf);
  while (done < n) {
    ssize_t r = ::pread(fd, p + done, n - done, static_cast<off_t>(offset + done));
    if (r < 0) throw IoError(std::string("read failed on ") + what + ": " + std::strerror(errno));
    if (r == 0) throw FormatError(std::string("truncated data in ") + what);
    done += static_cast<size_t>(r);
  }
}

std::string read_whole_file(const std::filesystem::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + what + ": " + p.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

void write_whole_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + p.string());
}

// Record payload: entity_id u64, dim u32, title, description, url,
// has_qid u8 [qid], tag_count u16, tags. Strings are u32 length + bytes.
std::string serialize_record(const EntityRecord& r) {
  std::string out;
  put_u64le(out, r.entity_id);
  put_u32le(out, r.embedding_dim);
  put_str(out, r.title);
  put_str(out, r.description);
  put_str(out, r.wikipedia_url);
  out.push_back(r.wikidata_qid ? 1 : 0);
  if (r.wikidata_qid) put_str(out, *r.wikidata_qid);
  put_u16le(out, static_cast<uint16_t>(r.instance_of.size()));
  for (const auto& tag : r.instance_of) put_str(out, tag);
  return out;
}

struct PayloadReader {
  const char* p;
  size_t left;

  void need(size_t n) const {
    if (left < n) throw FormatError("truncated record payload in kb.records");
  }
  uint64_t u64() {
    need(8);
    uint64_t v = get_u64le(p);
    p += 8;
    left -= 8;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = get_u32le(p);
    p += 4;
    left -= 4;
    return v;
  }
  uint16_t u16() {
    need(2);
    uint16_t v = get_u16le(p);
    p += 2;
    left -= 2;
    return v;
  }
  uint8_t u8() {
    need(1);
    uint8_t v = static_cast<uint8_t>(*p);
    p += 1;
    left -= 1;
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(p, n);
    p += n;
    left -= n;
    return s;
  }
};

EntityRecord parse_record(const char* data, size_t size) {
  PayloadReader r{data, size};
  EntityRecord rec;
  rec.entity_id = r.u64();
  rec.embedding_dim = r.u32();
  rec.title = r.str();
  rec.description = r.str();
  rec.wikipedia_url = r.str();
  if (r.u8()) rec.wikidata_qid = r.str();
  uint16_t n = r.u16();
  rec.instance_of.reserve(n);
  for (uint16_t i = 0; i < n; ++i) rec.instance_of.push_back(r.str());
  return rec;
}

uint64_t file_size_or_zero(const std::filesystem::path& p) {
  std::error_code ec;
  auto sz = std::filesystem::file_size(p, ec);
  return ec ? 0 : static_cast<uint64_t>(sz);
}

}  // namespace

bool valid_qid(std::string_view qid) {
  if (qid.size() < 2 || qid[0] != 'Q') return false;
  for (size_t i = 1; i < qid.size(); ++i)
    if (qid[i] < '0' || qid[i] > '9') return false;
  return true;
}

// ---- KbReader ---------------------------------------------------------------

KbReader::KbReader(const std::filesystem::path& dir) : dir_(dir) {
  if (!std::filesystem::exists(dir))
    throw IoError("KB path does not exist: " + dir.string());
  if (!std::filesystem::exists(header_path(dir)))
    throw FormatError("not a KB: missing kb.header in " + dir.string());

  std::string header = read_whole_file(header_path(dir), "kb.header");
  if (header.size() != kHeaderSize) throw FormatError("corrupt kb.header: wrong size");
  if (std::memcmp(header.data(), kMagic, 4) != 0)
    throw FormatError("corrupt kb.header: bad magic");
  uint32_t version = get_u32le(header.data() + 4);
  if (version != kKbFormatVersion)
    throw FormatError("unsupported KB format version " + std::to_string(version));
  uint64_t count = get_u64le(header.data() + 8);
  embedding_dim_ = get_u32le(header.data() + 16);
  qid_count_ = get_u64le(header.data() + 24);
  if (embedding_dim_ == 0) throw FormatError("corrupt kb.header: embedding_dim is 0");

  std::string idmap = read_whole_file(idmap_path(dir), "kb.idmap");
  if (idmap.size() != count * 16)
    throw FormatError("corrupt kb.idmap: size does not match header entity_count");
  ids_.reserve(count);
  offsets_.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t id = get_u64le(idmap.data() + i * 16);
    uint64_t off = get_u64le(idmap.data() + i * 16 + 8);
    if (!ids_.empty() && id <= ids_.back())
      throw FormatError("corrupt kb.idmap: ids not strictly increasing");
    ids_.push_back(id);
    offsets_.push_back(off);
  }

  uint64_t expect_vec = count * static_cast<uint64_t>(embedding_dim_) * 4;
  if (file_size_or_zero(vectors_path(dir)) != expect_vec)
    throw FormatError("corrupt kb.vectors: size does not match header");

  records_fd_ = ::open(records_path(dir).c_str(), O_RDONLY);
  if (records_fd_ < 0) throw IoError("cannot open kb.records in " + dir.string());
  vectors_fd_ = ::open(vectors_path(dir).c_str(), O_RDONLY);
  if (vectors_fd_ < 0) {
    ::close(records_fd_);
    records_fd_ = -1;
    throw IoError("cannot open kb.vectors in " + dir.string());
  }

  // Cheap header/record consistency probe on the first record.
  if (count > 0) {
    EntityRecord first;
    read_records_at(offsets_[0], &first);
    if (first.embedding_dim != embedding_dim_)
      throw FormatError("embedding_dim mismatch between header and records");
  }
}

KbReader::~KbReader() {
  if (records_fd_ >= 0) ::close(records_fd_);
  if (vectors_fd_ >= 0) ::close(vectors_fd_);
}

std::optional<uint32_t> KbReader::ordinal_of(uint64_t entity_id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), entity_id);
  if (it == ids_.end() || *it != entity_id) return std::nullopt;
  return static_cast<uint32_t>(it - ids_.begin());
}

void KbReader::read_records_at(uint64_t offset, EntityRecord* out) const {
  char lenbuf[4];
  pread_exact(records_fd_, lenbuf, 4, offset, "kb.records");
  uint32_t len = get_u32le(lenbuf);
  io_.add_record(4 + len);
  std::string payload(len, '\0');
  pread_exact(records_fd_, payload.data(), len, offset + 4, "kb.records");
  *out = parse_record(payload.data(), payload.size());
}

EntityRecord KbReader::get_entity(uint64_t entity_id) const {
  auto ord = ordinal_of(entity_id);
  if (!ord) throw NotFoundError("entity id " + std::to_string(entity_id) + " not found");
  return entity_by_ordinal(*ord);
}

EntityRecord KbReader::entity_by_ordinal(uint32_t ordinal) const {
  if (ordinal >= offsets_.size())
    throw NotFoundError("ordinal " + std::to_string(ordinal) + " out of range");
  EntityRecord rec;
  read_records_at(offsets_[ordinal], &rec);
  if (rec.embedding_dim != embedding_dim_)
    throw FormatError("embedding_dim mismatch between header and records");
  return rec;
}

std::vector<float> KbReader::get_embedding(uint64_t entity_id) const {
  auto ord = ordinal_of(entity_id);
  if (!ord) throw NotFoundError("entity id " + std::to_string(entity_id) + " not found");
  return embedding_by_ordinal(*ord);
}

std::vector<float> KbReader::embedding_by_ordinal(uint32_t ordinal) const {
  std::vector<float> out(embedding_dim_);
  embedding_into(ordinal, out.data());
  return out;
}

void KbReader::embedding_into(uint32_t ordinal, float* out) const {
  if (ordinal >= ids_.size())
    throw NotFoundError("ordinal " + std::to_string(ordinal) + " out of range");
  uint64_t bytes = static_cast<uint64_t>(embedding_dim_) * 4;
  pread_exact(vectors_fd_, out, bytes, static_cast<uint64_t>(ordinal) * bytes, "kb.vectors");
  io_.add_vector(bytes);
  // floats arrive little-endian; this build targets little-endian hosts.
}

void KbReader::for_each_record(
    const std::function<void(uint32_t, const EntityRecord&)>& fn) const {
  constexpr size_t kChunk = 1 << 20;
  std::string buf;
  uint64_t file_off = 0;
  uint32_t ordinal = 0;
  size_t consumed = 0;
  auto refill = [&](size_t need) {
    buf.erase(0, consumed);
    file_off += consumed;
    consumed = 0;
    while (buf.size() < need) {
      size_t old = buf.size();
      buf.resize(old + kChunk);
      ssize_t r = ::pread(records_fd_, buf.data() + old, kChunk,
                          static_cast<off_t>(file_off + old));
      if (r < 0) throw IoError(std::string("read failed on kb.records: ") + std::strerror(errno));
      buf.resize(old + static_cast<size_t>(r));
      io_.add_record(static_cast<uint64_t>(r));
      if (r == 0) break;
    }
    return buf.size() - consumed >= need;
  };
  while (ordinal < ids_.size()) {
    if (buf.size() - consumed < 4 && !refill(4))
      throw FormatError("truncated data in kb.records");
    uint32_t len = get_u32le(buf.data() + consumed);
    if (buf.size() - consumed < 4 + static_cast<size_t>(len) && !refill(4 + len))
      throw FormatError("truncated data in kb.records");
    EntityRecord rec = parse_record(buf.data() + consumed + 4, len);
    fn(ordinal, rec);
    consumed += 4 + len;
    ++ordinal;
  }
}

KbStats KbReader::stats() const {
  KbStats s;
  s.entity_count = ids_.size();
  s.embedding_dim = embedding_dim_;
  s.bytes_on_disk = file_size_or_zero(header_path(dir_)) +
                    file_size_or_zero(records_path(dir_)) +
                    file_size_or_zero(vectors_path(dir_)) +
                    file_size_or_zero(idmap_path(dir_));
  s.qid_coverage = ids_.empty() ? 1.0
                                : static_cast<double>(qid_count_) /
                                      static_cast<double>(ids_.size());
  return s;
}

uint64_t KbReader::vector_file_bytes() const {
  return file_size_or_zero(vectors_path(dir_));
}

// ---- KbWriter ---------------------------------------------------------------

KbWriter::KbWriter(std::filesystem::path dir, uint32_t embedding_dim)
    : dir_(std::move(dir)), embedding_dim_(embedding_dim) {
  if (embedding_dim_ == 0) throw ValidationError("embedding_dim must be positive");
  std::filesystem::create_directories(dir_);
}

void KbWriter::put(EntityRecord record, std::span<const float> embedding) {
  if (finalized_) throw ValidationError("KbWriter already finalized");
  if (record.title.empty()) throw ValidationError("entity title must be non-empty");
  if (record.wikidata_qid && !valid_qid(*record.wikidata_qid))
    throw ValidationError("invalid wikidata_qid: " + *record.wikidata_qid);
  if (embedding.size() != embedding_dim_)
    throw ValidationError("embedding length " + std::to_string(embedding.size()) +
                          " does not match KB embedding_dim " +
                          std::to_string(embedding_dim_));
  for (float v : embedding)
    if (!std::isfinite(v)) throw ValidationError("embedding contains non-finite value");
  record.embedding_dim = embedding_dim_;
  entries_.push_back({std::move(record), {embedding.begin(), embedding.end()}});
}

KbStats KbWriter::finalize() {
  if (finalized_) throw ValidationError("KbWriter already finalized");
  finalized_ = true;

  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return a.record.entity_id < b.record.entity_id;
  });
  for (size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].record.entity_id == entries_[i - 1].record.entity_id)
      throw ValidationError("entity id collision: " +
                            std::to_string(entries_[i].record.entity_id));
  }

  std::string records, vectors, idmap;
  uint64_t qid_count = 0;
  for (const auto& e : entries_) {
    put_u64le(idmap, e.record.entity_id);
    put_u64le(idmap, static_cast<uint64_t>(records.size()));
    std::string payload = serialize_record(e.record);
    put_u32le(records, static_cast<uint32_t>(payload.size()));
    records += payload;
    for (float v : e.embedding) put_f32le(vectors, v);
    if (e.record.wikidata_qid) ++qid_count;
  }

  std::string header;
  header.append(kMagic, 4);
  put_u32le(header, kKbFormatVersion);
  put_u64le(header, static_cast<uint64_t>(entries_.size()));
  put_u32le(header, embedding_dim_);
  put_u32le(header, 0);  // reserved
  put_u64le(header, qid_count);

  write_whole_file(records_path(dir_), records);
  write_whole_file(vectors_path(dir_), vectors);
  write_whole_file(idmap_path(dir_), idmap);
  write_whole_file(header_path(dir_), header);

  KbStats s;
  s.entity_count = entries_.size();
  s.embedding_dim = embedding_dim_;
  s.bytes_on_disk = header.size() + records.size() + vectors.size() + idmap.size();
  s.qid_coverage = entries_.empty() ? 1.0
                                    : static_cast<double>(qid_count) /
                                          static_cast<double>(entries_.size());
  entries_.clear();
  entries_.shrink_to_fit();
  return s;
}

}  // namespace elkb
