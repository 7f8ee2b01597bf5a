#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace elkb {

// One knowledge-base entry. embedding_dim mirrors the KB-wide dimension and
// is equal across all records of one KB.
struct EntityRecord {
  uint64_t entity_id = 0;
  std::string title;
  std::string description;
  std::string wikipedia_url;
  std::optional<std::string> wikidata_qid;
  std::vector<std::string> instance_of;
  uint32_t embedding_dim = 0;

  bool operator==(const EntityRecord&) const = default;
};

struct KbStats {
  uint64_t entity_count = 0;
  uint32_t embedding_dim = 0;
  uint64_t bytes_on_disk = 0;
  double qid_coverage = 1.0;  // empty KB is vacuously covered
};

// Byte counters for the read path, split per segment. The embedding counter
// backs the top-K-only loading checks.
struct IoSnapshot {
  uint64_t vector_bytes = 0;
  uint64_t vector_reads = 0;
  uint64_t record_bytes = 0;
  uint64_t record_reads = 0;
};

class IoCounters {
 public:
  void add_vector(uint64_t bytes) {
    vector_bytes_.fetch_add(bytes, std::memory_order_relaxed);
    vector_reads_.fetch_add(1, std::memory_order_relaxed);
  }
  void add_record(uint64_t bytes) {
    record_bytes_.fetch_add(bytes, std::memory_order_relaxed);
    record_reads_.fetch_add(1, std::memory_order_relaxed);
  }
  IoSnapshot snapshot() const {
    return {vector_bytes_.load(std::memory_order_relaxed),
            vector_reads_.load(std::memory_order_relaxed),
            record_bytes_.load(std::memory_order_relaxed),
            record_reads_.load(std::memory_order_relaxed)};
  }

 private:
  std::atomic<uint64_t> vector_bytes_{0};
  std::atomic<uint64_t> vector_reads_{0};
  std::atomic<uint64_t> record_bytes_{0};
  std::atomic<uint64_t> record_reads_{0};
};

bool valid_qid(std::string_view qid);

// Read handle over a KB directory (kb.header, kb.records, kb.vectors,
// kb.idmap; layout in docs/formats.md). Shareable across concurrent readers;
// all segment reads go through pread.
class KbReader {
 public:
  explicit KbReader(const std::filesystem::path& dir);
  ~KbReader();

  KbReader(const KbReader&) = delete;
  KbReader& operator=(const KbReader&) = delete;

  uint64_t entity_count() const { return ids_.size(); }
  uint32_t embedding_dim() const { return embedding_dim_; }
  const std::vector<uint64_t>& ids() const { return ids_; }

  // Ordinal of an id in the sorted id order, or nullopt.
  std::optional<uint32_t> ordinal_of(uint64_t entity_id) const;
  uint64_t id_of(uint32_t ordinal) const { return ids_.at(ordinal); }

  EntityRecord get_entity(uint64_t entity_id) const;
  EntityRecord entity_by_ordinal(uint32_t ordinal) const;

  std::vector<float> get_embedding(uint64_t entity_id) const;
  std::vector<float> embedding_by_ordinal(uint32_t ordinal) const;
  // Reads one embedding into out (size embedding_dim). Fast path for batch
  // fetches; counted like any other vector read.
  void embedding_into(uint32_t ordinal, float* out) const;

  // Sequential scan of all records in ordinal order with buffered reads.
  void for_each_record(const std::function<void(uint32_t, const EntityRecord&)>& fn) const;

  KbStats stats() const;
  IoSnapshot io_snapshot() const { return io_.snapshot(); }
  uint64_t vector_file_bytes() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void read_records_at(uint64_t offset, EntityRecord* out) const;

  std::filesystem::path dir_;
  int records_fd_ = -1;
  int vectors_fd_ = -1;
  uint32_t embedding_dim_ = 0;
  uint64_t qid_count_ = 0;
  std::vector<uint64_t> ids_;         // sorted ascending
  std::vector<uint64_t> offsets_;     // byte offset of each record's length prefix
  mutable IoCounters io_;
};

// Single-writer KB builder. Records are buffered, sorted by entity_id and
// written on finalize(); duplicate ids abort.
class KbWriter {
 public:
  KbWriter(std::filesystem::path dir, uint32_t embedding_dim);

  void put(EntityRecord record, std::span<const float> embedding);
  size_t pending() const { return entries_.size(); }

  // Writes all segments and returns the resulting stats. The writer is spent
  // afterwards.
  KbStats finalize();

 private:
  struct Entry {
    EntityRecord record;
    std::vector<float> embedding;
  };
  std::filesystem::path dir_;
  uint32_t embedding_dim_;
  std::vector<Entry> entries_;
  bool finalized_ = false;
};

}  // namespace elkb
