#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace elkb {

// One analyzed token. Offsets are codepoint offsets into the original text,
// end exclusive. text is the lowercased token.
struct Token {
  std::string text;
  size_t start_cp = 0;
  size_t end_cp = 0;

  bool operator==(const Token&) const = default;
};

// Decodes the codepoint starting at byte offset i. Invalid sequences decode
// as U+FFFD with length 1 so offsets stay well defined on arbitrary bytes.
struct DecodedCp {
  uint32_t cp;
  size_t len;
};
DecodedCp decode_utf8(std::string_view s, size_t i);

size_t codepoint_length(std::string_view s);

// Slice [start_cp, end_cp) measured in codepoints.
std::string codepoint_slice(std::string_view s, size_t start_cp, size_t end_cp);

// True for codepoints kept inside tokens: ASCII alphanumerics plus common
// letter ranges (Latin-1/Extended, Greek, Cyrillic, Kana, CJK, Hangul).
// Everything else is a token boundary.
bool is_word_codepoint(uint32_t cp);

// ASCII, Latin-1, Greek and Cyrillic uppercase fold; other codepoints pass
// through unchanged.
uint32_t lower_codepoint(uint32_t cp);

// Splits on any non-word codepoint and lowercases. Empty input yields an
// empty list.
std::vector<Token> tokenize(std::string_view text);

// Token texts only, offsets discarded.
std::vector<std::string> token_texts(std::string_view text);

void append_utf8(std::string& out, uint32_t cp);

}  // namespace elkb
