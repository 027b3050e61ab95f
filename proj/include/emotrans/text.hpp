#pragma once

#include <cctype>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "emotrans/error.hpp"

namespace emotrans {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::string line;
  std::istringstream is(s);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

inline std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Splits a UTF-8 string into code points (each returned as its byte sequence).
// Malformed lead bytes are passed through one byte at a time.
inline std::vector<std::string> split_utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char b = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if ((b & 0x80u) == 0x00u) len = 1;
    else if ((b & 0xE0u) == 0xC0u) len = 2;
    else if ((b & 0xF0u) == 0xE0u) len = 3;
    else if ((b & 0xF8u) == 0xF0u) len = 4;
    if (i + len > s.size()) len = 1;
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

// Decodes the code point at byte offset i; advances i past it.
inline std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
  unsigned char b = static_cast<unsigned char>(s[i]);
  std::uint32_t cp = 0;
  std::size_t len = 1;
  if ((b & 0x80u) == 0x00u) { cp = b; len = 1; }
  else if ((b & 0xE0u) == 0xC0u) { cp = b & 0x1Fu; len = 2; }
  else if ((b & 0xF0u) == 0xE0u) { cp = b & 0x0Fu; len = 3; }
  else if ((b & 0xF8u) == 0xF0u) { cp = b & 0x07u; len = 4; }
  else { ++i; return 0xFFFDu; }
  if (i + len > s.size()) { ++i; return 0xFFFDu; }
  for (std::size_t k = 1; k < len; ++k)
    cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3Fu);
  i += len;
  return cp;
}

inline bool is_cjk(std::uint32_t cp) {
  return (cp >= 0x4E00u && cp <= 0x9FFFu) ||    // unified ideographs
         (cp >= 0x3400u && cp <= 0x4DBFu) ||    // extension A
         (cp >= 0xF900u && cp <= 0xFAFFu) ||    // compatibility ideographs
         (cp >= 0x3000u && cp <= 0x303Fu) ||    // CJK punctuation
         (cp >= 0xFF00u && cp <= 0xFFEFu);      // fullwidth forms
}

inline bool is_space_char(const std::string& ch) {
  return ch.size() == 1 &&
         std::isspace(static_cast<unsigned char>(ch[0])) != 0;
}

// Whitespace-delimited token count (used for English word statistics).
inline std::size_t count_words(const std::string& s) {
  std::istringstream is(s);
  std::string tok;
  std::size_t n = 0;
  while (is >> tok) ++n;
  return n;
}

// Language-aware length: words for English, CJK-aware character count for
// Chinese (non-space code points).
inline std::size_t count_units(const std::string& s, bool chinese) {
  if (!chinese) return count_words(s);
  std::size_t n = 0;
  for (const auto& ch : split_utf8_chars(s))
    if (!is_space_char(ch)) ++n;
  return n;
}

}  // namespace emotrans
