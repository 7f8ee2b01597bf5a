#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace elkb {

// Minimal seekable named-tensor container: magic "ELWT", then per tensor
// (name length u32, name, byte length u64, raw bytes) until EOF.
struct TensorEntry {
  std::string name;
  std::string bytes;
};

void write_model_container(const std::filesystem::path& path,
                           const std::vector<TensorEntry>& tensors);
std::vector<TensorEntry> read_model_container(const std::filesystem::path& path);

struct PruneReport {
  uint64_t tensors_kept = 0;
  uint64_t tensors_removed = 0;
  uint64_t bytes_before = 0;
  uint64_t bytes_after = 0;
};

// Drops tensors whose names start with remove_prefix; kept payloads are
// copied byte-identically in input order. Refuses to emit an empty model.
PruneReport prune_model_artifact(const std::filesystem::path& in_path,
                                 const std::filesystem::path& out_path,
                                 std::string_view remove_prefix = "cand_");

}  // namespace elkb
