#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "elkb/kb.hpp"

namespace elkb {

enum class MentionLabel { product, organization, unknown };

const char* label_name(MentionLabel label);
MentionLabel parse_label(std::string_view name);  // unrecognized -> unknown

// A detected span. Offsets are codepoint offsets, end exclusive; surface is
// the exact slice of the input text.
struct Mention {
  size_t start = 0;
  size_t end = 0;
  std::string surface;
  MentionLabel label = MentionLabel::unknown;

  bool operator==(const Mention&) const = default;
};

// Normalized phrase -> label. Matching uses the same analyzer as retrieval.
struct Gazetteer {
  std::unordered_map<std::string, MentionLabel> phrases;
  size_t max_tokens = 0;

  bool operator==(const Gazetteer&) const = default;
};

struct AliasLoadReport {
  size_t rows_loaded = 0;
  size_t rows_malformed = 0;
};

// Phrases from entity titles (labels from instance_of when available), plus
// optional alias TSV rows (phrase<TAB>label); alias entries override title
// entries on the same phrase.
Gazetteer build_gazetteer(const KbReader& kb,
                          const std::optional<std::filesystem::path>& alias_path = {},
                          AliasLoadReport* report = nullptr);

// Greedy longest-match left to right over normalized tokens; emitted offsets
// refer to the original text. Deterministic and idempotent.
std::vector<Mention> detect(std::string_view text, const Gazetteer& gazetteer);

struct ExternalSpan {
  size_t start = 0;
  size_t end = 0;
  std::string label;  // empty -> unknown
};

// Validates externally supplied spans (bounds, overlap), sorts by start and
// extracts surfaces. Overlap or out-of-bounds spans raise ValidationError
// naming the offenders.
std::vector<Mention> from_external_spans(std::string_view text,
                                         const std::vector<ExternalSpan>& spans);

}  // namespace elkb
