#pragma once

// Character-level helpers for scanning SQL text. Internal to the library.

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>

namespace choicesql::detail {

inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

/// Returns the index one past the closing quote of the literal starting at
/// `pos`, or npos if unterminated. SQL doubling (`''`) reads as two literals
/// back to back, which is equivalent for scanning purposes.
inline std::size_t skip_quoted(std::string_view s, std::size_t pos) {
  const char quote = s[pos];
  const std::size_t close = s.find(quote, pos + 1);
  return close == std::string_view::npos ? std::string_view::npos : close + 1;
}

/// Word starting at `pos` (identifier characters), empty if none.
inline std::string_view word_at(std::string_view s, std::size_t pos) {
  std::size_t end = pos;
  while (end < s.size() && is_ident_char(s[end])) ++end;
  return s.substr(pos, end - pos);
}

/// Collapses whitespace runs outside quotes to one space and trims.
inline std::string normalize_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < s.size();) {
    const char c = s[i];
    if (is_space(c)) {
      pending_space = !out.empty();
      ++i;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (c == '\'' || c == '"') {
      std::size_t end = skip_quoted(s, i);
      if (end == std::string_view::npos) end = s.size();
      out.append(s.substr(i, end - i));
      i = end;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

}  // namespace choicesql::detail
