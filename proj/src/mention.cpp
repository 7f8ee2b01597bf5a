#include "elkb/mention.hpp"

#include <algorithm>
#include <fstream>

#include "elkb/errors.hpp"
#include "elkb/text.hpp"

namespace elkb {

const char* label_name(MentionLabel label) {
  switch (label) {
    case MentionLabel::product: return "product";
    case MentionLabel::organization: return "organization";
    default: return "unknown";
  }
}

MentionLabel parse_label(std::string_view name) {
  if (name == "product") return MentionLabel::product;
  if (name == "organization") return MentionLabel::organization;
  return MentionLabel::unknown;
}

namespace {

std::string normalize_phrase(std::string_view text, size_t* token_count = nullptr) {
  auto tokens = token_texts(text);
  if (token_count) *token_count = tokens.size();
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

MentionLabel label_from_tags(const std::vector<std::string>& tags) {
  for (const auto& t : tags)
    if (t == "product") return MentionLabel::product;
  for (const auto& t : tags)
    if (t == "organization") return MentionLabel::organization;
  return MentionLabel::unknown;
}

}  // namespace

Gazetteer build_gazetteer(const KbReader& kb,
                          const std::optional<std::filesystem::path>& alias_path,
                          AliasLoadReport* report) {
  Gazetteer gaz;
  kb.for_each_record([&](uint32_t, const EntityRecord& rec) {
    size_t n_tokens = 0;
    std::string phrase = normalize_phrase(rec.title, &n_tokens);
    if (phrase.empty()) return;
    gaz.phrases.emplace(phrase, label_from_tags(rec.instance_of));
    gaz.max_tokens = std::max(gaz.max_tokens, n_tokens);
  });

  AliasLoadReport local;
  if (alias_path) {
    std::ifstream in(*alias_path);
    if (!in) throw IoError("cannot open alias file: " + alias_path->string());
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      size_t tab = line.find('\t');
      std::string raw_phrase = tab == std::string::npos ? line : line.substr(0, tab);
      std::string label = tab == std::string::npos ? "" : line.substr(tab + 1);
      size_t n_tokens = 0;
      std::string phrase = normalize_phrase(raw_phrase, &n_tokens);
      if (tab == std::string::npos || phrase.empty()) {
        ++local.rows_malformed;
        continue;
      }
      gaz.phrases[phrase] = parse_label(label);  // alias overrides title entry
      gaz.max_tokens = std::max(gaz.max_tokens, n_tokens);
      ++local.rows_loaded;
    }
  }
  if (report) *report = local;
  return gaz;
}

std::vector<Mention> detect(std::string_view text, const Gazetteer& gazetteer) {
  std::vector<Mention> out;
  if (gazetteer.phrases.empty()) return out;
  auto tokens = tokenize(text);
  size_t i = 0;
  while (i < tokens.size()) {
    size_t longest = std::min(gazetteer.max_tokens, tokens.size() - i);
    bool matched = false;
    for (size_t len = longest; len >= 1; --len) {
      std::string phrase = tokens[i].text;
      for (size_t j = 1; j < len; ++j) {
        phrase.push_back(' ');
        phrase += tokens[i + j].text;
      }
      auto it = gazetteer.phrases.find(phrase);
      if (it == gazetteer.phrases.end()) continue;
      Mention m;
      m.start = tokens[i].start_cp;
      m.end = tokens[i + len - 1].end_cp;
      m.surface = codepoint_slice(text, m.start, m.end);
      m.label = it->second;
      out.push_back(std::move(m));
      i += len;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return out;
}

std::vector<Mention> from_external_spans(std::string_view text,
                                         const std::vector<ExternalSpan>& spans) {
  size_t text_len = codepoint_length(text);
  std::vector<std::string> offenders;
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > text_len)
      offenders.push_back("[" + std::to_string(s.start) + "," + std::to_string(s.end) + ")");
  }
  if (!offenders.empty()) {
    std::string msg = "invalid spans (bounds):";
    for (const auto& o : offenders) msg += " " + o;
    msg += "; text length is " + std::to_string(text_len) + " codepoints";
    throw ValidationError(msg);
  }

  std::vector<ExternalSpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end(), [](const ExternalSpan& a, const ExternalSpan& b) {
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start < sorted[i - 1].end)
      throw ValidationError("overlapping spans: [" + std::to_string(sorted[i - 1].start) + "," +
                            std::to_string(sorted[i - 1].end) + ") and [" +
                            std::to_string(sorted[i].start) + "," +
                            std::to_string(sorted[i].end) + ")");
  }

  std::vector<Mention> out;
  out.reserve(sorted.size());
  for (const auto& s : sorted) {
    Mention m;
    m.start = s.start;
    m.end = s.end;
    m.surface = codepoint_slice(text, s.start, s.end);
    m.label = parse_label(s.label);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace elkb
