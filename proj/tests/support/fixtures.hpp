#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "elkb/kb.hpp"

namespace elkb::test {

// Scratch directory under the test working directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Three hand-built records (ids 7, 12, 40; dim 4; two have QIDs) written to
// dir. Record 7 holds the embedding (1, 0, 0, 0).
std::vector<EntityRecord> write_tiny_kb(const std::filesystem::path& dir);

// n random records with printable/unicode fields and deterministic
// embeddings, written to dir and returned in insertion order.
struct RandomKbEntry {
  EntityRecord record;
  std::vector<float> embedding;
};
std::vector<RandomKbEntry> write_random_kb(const std::filesystem::path& dir, size_t n,
                                           uint32_t dim, uint64_t seed);

}  // namespace elkb::test
