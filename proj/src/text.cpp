#include "elkb/text.hpp"

namespace elkb {

namespace {
constexpr uint32_t kReplacement = 0xFFFD;
}

DecodedCp decode_utf8(std::string_view s, size_t i) {
  const auto b0 = static_cast<uint8_t>(s[i]);
  if (b0 < 0x80) return {b0, 1};

  auto cont = [&](size_t off) -> int {
    if (i + off >= s.size()) return -1;
    auto b = static_cast<uint8_t>(s[i + off]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };

  if ((b0 & 0xE0) == 0xC0) {
    int c1 = cont(1);
    if (c1 < 0) return {kReplacement, 1};
    uint32_t cp = ((b0 & 0x1Fu) << 6) | static_cast<uint32_t>(c1);
    if (cp < 0x80) return {kReplacement, 1};  // overlong
    return {cp, 2};
  }
  if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = cont(2);
    if (c1 < 0 || c2 < 0) return {kReplacement, 1};
    uint32_t cp = ((b0 & 0x0Fu) << 12) | (static_cast<uint32_t>(c1) << 6) |
                  static_cast<uint32_t>(c2);
    if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) return {kReplacement, 1};
    return {cp, 3};
  }
  if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 < 0 || c2 < 0 || c3 < 0) return {kReplacement, 1};
    uint32_t cp = ((b0 & 0x07u) << 18) | (static_cast<uint32_t>(c1) << 12) |
                  (static_cast<uint32_t>(c2) << 6) | static_cast<uint32_t>(c3);
    if (cp < 0x10000 || cp > 0x10FFFF) return {kReplacement, 1};
    return {cp, 4};
  }
  return {kReplacement, 1};
}

size_t codepoint_length(std::string_view s) {
  size_t n = 0;
  for (size_t i = 0; i < s.size();) {
    i += decode_utf8(s, i).len;
    ++n;
  }
  return n;
}

std::string codepoint_slice(std::string_view s, size_t start_cp, size_t end_cp) {
  std::string out;
  size_t cp_index = 0;
  for (size_t i = 0; i < s.size() && cp_index < end_cp;) {
    auto d = decode_utf8(s, i);
    if (cp_index >= start_cp) out.append(s.substr(i, d.len));
    i += d.len;
    ++cp_index;
  }
  return out;
}

bool is_word_codepoint(uint32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
           (cp >= 'A' && cp <= 'Z');
  }
  if (cp >= 0xC0 && cp <= 0xFF) return cp != 0xD7 && cp != 0xF7;
  if (cp >= 0x100 && cp <= 0x24F) return true;    // Latin Extended A/B
  if (cp >= 0x386 && cp <= 0x3FF) return true;    // Greek
  if (cp >= 0x400 && cp <= 0x4FF) return true;    // Cyrillic
  if (cp >= 0x3040 && cp <= 0x30FF) return true;  // Kana
  if (cp >= 0x4E00 && cp <= 0x9FFF) return true;  // CJK Unified
  if (cp >= 0xAC00 && cp <= 0xD7A3) return true;  // Hangul
  return false;
}

uint32_t lower_codepoint(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;  // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;  // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  Token cur;
  bool in_token = false;
  size_t cp_index = 0;
  for (size_t i = 0; i < text.size();) {
    auto d = decode_utf8(text, i);
    if (is_word_codepoint(d.cp)) {
      if (!in_token) {
        cur.text.clear();
        cur.start_cp = cp_index;
        in_token = true;
      }
      append_utf8(cur.text, lower_codepoint(d.cp));
      cur.end_cp = cp_index + 1;
    } else if (in_token) {
      tokens.push_back(cur);
      in_token = false;
    }
    i += d.len;
    ++cp_index;
  }
  if (in_token) tokens.push_back(cur);
  return tokens;
}

std::vector<std::string> token_texts(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) out.push_back(std::move(t.text));
  return out;
}

}  // namespace elkb
