#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace kgmn {

enum class LexKind { Identifier, Keyword, Literal, Operator, Punctuation };

inline std::string_view lex_kind_name(LexKind k) {
  switch (k) {
    case LexKind::Identifier: return "identifier";
    case LexKind::Keyword: return "keyword";
    case LexKind::Literal: return "literal";
    case LexKind::Operator: return "operator";
    case LexKind::Punctuation: return "punctuation";
  }
  return "?";
}

inline LexKind lex_kind_from_name(std::string_view s) {
  if (s == "identifier") return LexKind::Identifier;
  if (s == "keyword") return LexKind::Keyword;
  if (s == "literal") return LexKind::Literal;
  if (s == "operator") return LexKind::Operator;
  if (s == "punctuation") return LexKind::Punctuation;
  throw DataError("unknown lexical kind '" + std::string(s) + "'");
}

struct Token {
  std::string surface;
  LexKind kind;
  std::size_t offset;  // byte offset into the source text

  bool operator==(const Token&) const = default;
};

// Lexemes of one method in source order. Comments and whitespace are dropped;
// source.substr(t.offset, t.surface.size()) == t.surface for every token.
struct TokenSeq {
  std::vector<Token> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }
};

inline bool is_java_keyword(std::string_view word) {
  static const std::unordered_set<std::string_view> kKeywords = {
      "abstract", "assert",     "boolean",   "break",      "byte",      "case",
      "catch",    "char",       "class",     "const",      "continue",  "default",
      "do",       "double",     "else",      "enum",       "extends",   "final",
      "finally",  "float",      "for",       "goto",       "if",        "implements",
      "import",   "instanceof", "int",       "interface",  "long",      "native",
      "new",      "package",    "private",   "protected",  "public",    "return",
      "short",    "static",     "strictfp",  "super",      "switch",    "synchronized",
      "this",     "throw",      "throws",    "transient",  "try",       "void",
      "volatile", "while",      "var",       "yield"};
  return kKeywords.count(word) != 0;
}

namespace detail {

inline std::array<std::size_t, 2> line_col(std::string_view src, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < src.size(); ++i) {
    if (src[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

[[noreturn]] inline void fail(std::string_view src, std::size_t offset, const std::string& what) {
  auto [line, col] = line_col(src, offset);
  throw ParseError(what, offset, line, col);
}

}  // namespace detail

inline TokenSeq tokenize_method(std::string_view src) {
  // Longest match first.
  static const std::array<std::string_view, 36> kOperators = {
      ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==",
      "!=",   "<=",  ">=",  "+=",  "-=",  "*=", "/=", "%=", "&=", "|=", "^=", "<<",
      ">>",   "+",   "-",   "*",   "/",   "%",  "=",  "<",  ">",  "!",  "~",  "?"};
  static const std::string_view kSingleOps = ":&|^@";
  static const std::string_view kPunct = "(){}[];,.";

  TokenSeq seq;
  std::vector<std::pair<char, std::size_t>> brackets;
  std::size_t i = 0;
  const std::size_t n = src.size();

  auto push = [&](std::size_t begin, std::size_t end, LexKind kind) {
    seq.tokens.push_back(Token{std::string(src.substr(begin, end - begin)), kind, begin});
  };

  while (i < n) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      const auto end = src.find("*/", i + 2);
      if (end == std::string_view::npos) detail::fail(src, i, "unterminated block comment");
      i = end + 2;
      continue;
    }
    if (is_identifier_start(c)) {
      std::size_t j = i + 1;
      while (j < n && is_identifier_char(src[j])) ++j;
      const auto word = src.substr(i, j - i);
      LexKind kind = LexKind::Identifier;
      if (word == "true" || word == "false" || word == "null")
        kind = LexKind::Literal;
      else if (is_java_keyword(word))
        kind = LexKind::Keyword;
      push(i, j, kind);
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i + 1;
      while (j < n) {
        const char d = src[j];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
          ++j;
        } else if ((d == '+' || d == '-') && (src[j - 1] == 'e' || src[j - 1] == 'E') &&
                   src.substr(i, 2) != "0x" && src.substr(i, 2) != "0X") {
          ++j;
        } else {
          break;
        }
      }
      push(i, j, LexKind::Literal);
      i = j;
      continue;
    }
    if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      bool closed = false;
      while (j < n) {
        if (src[j] == '\\') {
          j += 2;
          continue;
        }
        if (src[j] == '\n') break;
        if (src[j] == c) {
          closed = true;
          break;
        }
        ++j;
      }
      if (!closed)
        detail::fail(src, i, c == '"' ? "unterminated string literal" : "unterminated char literal");
      push(i, j + 1, LexKind::Literal);
      i = j + 1;
      continue;
    }
    if (kPunct.find(c) != std::string_view::npos) {
      if (c == '(' || c == '{' || c == '[') {
        brackets.emplace_back(c, i);
      } else if (c == ')' || c == '}' || c == ']') {
        const char open = c == ')' ? '(' : c == '}' ? '{' : '[';
        if (brackets.empty() || brackets.back().first != open)
          detail::fail(src, i, std::string("unbalanced '") + c + "'");
        brackets.pop_back();
      }
      push(i, i + 1, LexKind::Punctuation);
      ++i;
      continue;
    }
    bool matched = false;
    for (auto op : kOperators) {
      if (src.substr(i, op.size()) == op) {
        push(i, i + op.size(), LexKind::Operator);
        i += op.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (kSingleOps.find(c) != std::string_view::npos) {
      push(i, i + 1, LexKind::Operator);
      ++i;
      continue;
    }
    detail::fail(src, i, std::string("unexpected character '") + c + "'");
  }

  if (!brackets.empty())
    detail::fail(src, brackets.back().second,
                 std::string("unbalanced '") + brackets.back().first + "'");
  if (seq.tokens.empty()) throw ParseError("empty input", 0, 1, 1);
  return seq;
}

}  // namespace kgmn
