#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace kgmn {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool is_identifier_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

inline bool is_identifier_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

inline bool is_all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Splits an identifier by Java naming conventions: '_' and '$' separate
// pieces, and inside a piece lower->Upper, letter<->digit and the end of an
// acronym run ("HTTPRequest" -> http, request) are boundaries. Anything that
// is not an identifier comes back as its lowercase self.
inline std::vector<std::string> split_subtokens(std::string_view surface) {
  if (surface.empty() || !is_identifier_start(surface.front())) return {to_lower(surface)};

  enum class Cls { Lower, Upper, Digit, Sep };
  auto cls = [](char c) {
    auto u = static_cast<unsigned char>(c);
    if (std::isdigit(u)) return Cls::Digit;
    if (std::isupper(u)) return Cls::Upper;
    if (std::islower(u)) return Cls::Lower;
    return Cls::Sep;
  };

  std::vector<std::string> parts;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) parts.push_back(to_lower(cur));
    cur.clear();
  };

  for (std::size_t i = 0; i < surface.size(); ++i) {
    const char c = surface[i];
    const Cls k = cls(c);
    if (k == Cls::Sep) {
      flush();
      continue;
    }
    if (!cur.empty()) {
      const Cls prev = cls(cur.back());
      bool split = false;
      if (k == Cls::Digit && prev != Cls::Digit) split = true;
      if (k != Cls::Digit && prev == Cls::Digit) split = true;
      if (k == Cls::Upper && prev == Cls::Lower) split = true;
      // Acronym run ending: "HTTPRequest" splits before 'R'.
      if (k == Cls::Upper && prev == Cls::Upper && i + 1 < surface.size() &&
          cls(surface[i + 1]) == Cls::Lower)
        split = true;
      if (split) flush();
    }
    cur.push_back(c);
  }
  flush();
  if (parts.empty()) return {to_lower(surface)};
  return parts;
}

}  // namespace kgmn
