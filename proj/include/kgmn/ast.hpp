#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "lexer.hpp"

namespace kgmn {

enum class AstKind { MethodDecl, ParamList, Block, Statement, Expr, Call, Name, Literal, Operator };

inline constexpr std::size_t kAstKindCount = 9;

inline std::string_view ast_kind_name(AstKind k) {
  switch (k) {
    case AstKind::MethodDecl: return "MethodDecl";
    case AstKind::ParamList: return "ParamList";
    case AstKind::Block: return "Block";
    case AstKind::Statement: return "Statement";
    case AstKind::Expr: return "Expr";
    case AstKind::Call: return "Call";
    case AstKind::Name: return "Name";
    case AstKind::Literal: return "Literal";
    case AstKind::Operator: return "Operator";
  }
  return "?";
}

// A child is either another interior node or a token (a leaf).
struct AstChild {
  bool is_token;
  std::size_t index;

  bool operator==(const AstChild&) const = default;
};

struct AstNode {
  AstKind kind;
  std::vector<AstChild> children;
};

// Simplified parse tree. Interior nodes carry a kind; leaves are the tokens
// of the TokenSeq, each attached to exactly one parent.
struct AstTree {
  std::vector<AstNode> nodes;
  std::size_t root = 0;
  std::size_t name_token = 0;  // declaration-site method name

  // Parent interior node of every token; throws if coverage is not exact.
  std::vector<std::size_t> token_parents(std::size_t token_count) const {
    std::vector<std::optional<std::size_t>> parent(token_count);
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      for (const auto& ch : nodes[id].children) {
        if (!ch.is_token) continue;
        if (ch.index >= token_count)
          throw ConsistencyError("AST leaf refers to token " + std::to_string(ch.index) +
                                 " beyond the token sequence");
        if (parent[ch.index])
          throw ConsistencyError("token " + std::to_string(ch.index) + " attached to two leaves");
        parent[ch.index] = id;
      }
    }
    std::vector<std::size_t> out(token_count);
    for (std::size_t t = 0; t < token_count; ++t) {
      if (!parent[t]) throw ConsistencyError("token " + std::to_string(t) + " has no AST leaf");
      out[t] = *parent[t];
    }
    return out;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 1}};
    while (!stack.empty()) {
      auto [id, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      for (const auto& ch : nodes[id].children)
        if (!ch.is_token) stack.emplace_back(ch.index, d + 1);
    }
    return best;
  }
};

namespace detail {

class MethodParser {
 public:
  explicit MethodParser(const TokenSeq& seq) : seq_(seq) {}

  AstTree parse() {
    tree_.root = parse_method_decl();
    if (pos_ != seq_.size()) error("trailing tokens after method body");
    return std::move(tree_);
  }

 private:
  const TokenSeq& seq_;
  AstTree tree_;
  std::size_t pos_ = 0;

  [[noreturn]] void error(const std::string& what) const {
    const std::size_t offset = pos_ < seq_.size() ? seq_[pos_].offset
                               : seq_.size() ? seq_.tokens.back().offset
                                             : 0;
    const std::string near = pos_ < seq_.size() ? " near '" + seq_[pos_].surface + "'" : " at end of input";
    throw ParseError(what + near, offset);
  }

  bool at_end() const { return pos_ >= seq_.size(); }
  const Token& peek(std::size_t ahead = 0) const {
    static const Token kEnd{"", LexKind::Punctuation, 0};
    return pos_ + ahead < seq_.size() ? seq_[pos_ + ahead] : kEnd;
  }
  bool peek_is(std::string_view s, std::size_t ahead = 0) const {
    return pos_ + ahead < seq_.size() && seq_[pos_ + ahead].surface == s;
  }

  std::size_t make(AstKind kind) {
    tree_.nodes.push_back(AstNode{kind, {}});
    return tree_.nodes.size() - 1;
  }
  void add_node(std::size_t parent, std::size_t child) {
    tree_.nodes[parent].children.push_back(AstChild{false, child});
  }
  void add_token(std::size_t parent) {
    if (at_end()) error("unexpected end of input");
    tree_.nodes[parent].children.push_back(AstChild{true, pos_++});
  }
  void expect(std::size_t parent, std::string_view s) {
    if (!peek_is(s)) error("expected '" + std::string(s) + "'");
    add_token(parent);
  }
  // Identifier -> Name, literal -> Literal, operator -> Operator, else bare leaf.
  void add_wrapped(std::size_t parent) {
    if (at_end()) error("unexpected end of input");
    switch (peek().kind) {
      case LexKind::Identifier: {
        auto n = make(AstKind::Name);
        add_node(parent, n);
        add_token(n);
        return;
      }
      case LexKind::Literal: {
        auto n = make(AstKind::Literal);
        add_node(parent, n);
        add_token(n);
        return;
      }
      case LexKind::Operator: {
        auto n = make(AstKind::Operator);
        add_node(parent, n);
        add_token(n);
        return;
      }
      default: add_token(parent);
    }
  }

  std::size_t parse_method_decl() {
    auto decl = make(AstKind::MethodDecl);
    // annotations
    while (peek_is("@") && peek(1).kind == LexKind::Identifier && !peek_is("interface", 1)) {
      add_token(decl);
      add_wrapped(decl);
      if (peek_is("(")) skip_balanced_into(decl);
    }
    // modifiers, type parameters, return type up to the name
    while (!at_end() && !(peek(1).surface == "(" && peek().kind == LexKind::Identifier)) {
      if (peek_is("{") || peek_is(";") || peek_is("(")) error("expected method name");
      add_wrapped(decl);
    }
    if (at_end()) error("expected method declaration");
    tree_.name_token = pos_;
    add_wrapped(decl);

    auto params = make(AstKind::ParamList);
    add_node(decl, params);
    expect(params, "(");
    int depth = 0;
    while (!at_end() && !(depth == 0 && peek_is(")"))) {
      if (peek_is("(")) ++depth;
      if (peek_is(")")) --depth;
      add_wrapped(params);
    }
    expect(params, ")");

    while (!at_end() && !peek_is("{")) {
      if (peek_is(";")) error("method without a body");
      add_wrapped(decl);
    }
    add_node(decl, parse_block());
    return decl;
  }

  void skip_balanced_into(std::size_t parent) {
    int depth = 0;
    do {
      if (peek_is("(")) ++depth;
      if (peek_is(")")) --depth;
      add_wrapped(parent);
    } while (!at_end() && depth > 0);
  }

  std::size_t parse_block() {
    auto block = make(AstKind::Block);
    expect(block, "{");
    while (!at_end() && !peek_is("}")) add_node(block, parse_statement());
    expect(block, "}");
    return block;
  }

  void parse_paren_expr(std::size_t parent) {
    expect(parent, "(");
    add_node(parent, parse_expr({")"}));
    expect(parent, ")");
  }

  std::size_t parse_statement() {
    if (peek_is("{")) return parse_block();
    auto st = make(AstKind::Statement);
    const auto& head = peek().surface;

    if (head == ";") {
      add_token(st);
    } else if (head == "if") {
      add_token(st);
      parse_paren_expr(st);
      add_node(st, parse_statement());
      if (peek_is("else")) {
        add_token(st);
        add_node(st, parse_statement());
      }
    } else if (head == "while" || head == "switch" || head == "synchronized") {
      add_token(st);
      parse_paren_expr(st);
      add_node(st, parse_statement());
    } else if (head == "for") {
      add_token(st);
      expect(st, "(");
      while (true) {
        if (!peek_is(";") && !peek_is(")")) add_node(st, parse_expr({";", ")"}));
        if (peek_is(";")) {
          add_token(st);
          continue;
        }
        break;
      }
      expect(st, ")");
      add_node(st, parse_statement());
    } else if (head == "do") {
      add_token(st);
      add_node(st, parse_statement());
      expect(st, "while");
      parse_paren_expr(st);
      expect(st, ";");
    } else if (head == "try") {
      add_token(st);
      if (peek_is("(")) {
        add_token(st);
        while (!peek_is(")")) {
          add_node(st, parse_expr({";", ")"}));
          if (peek_is(";")) add_token(st);
        }
        expect(st, ")");
      }
      add_node(st, parse_block());
      bool handled = false;
      while (peek_is("catch")) {
        add_token(st);
        parse_paren_expr(st);
        add_node(st, parse_block());
        handled = true;
      }
      if (peek_is("finally")) {
        add_token(st);
        add_node(st, parse_block());
        handled = true;
      }
      (void)handled;
    } else if (head == "case") {
      add_token(st);
      add_node(st, parse_expr({":", "->"}));
      add_token(st);
    } else if (head == "default" && (peek_is(":", 1) || peek_is("->", 1))) {
      add_token(st);
      add_token(st);
    } else if (head == "return" || head == "throw" || head == "yield" || head == "assert") {
      add_token(st);
      if (!peek_is(";")) add_node(st, parse_expr({";"}));
      expect(st, ";");
    } else if (head == "break" || head == "continue") {
      add_token(st);
      if (peek().kind == LexKind::Identifier) add_wrapped(st);
      expect(st, ";");
    } else if (head == "else" || head == "catch" || head == "finally") {
      error("'" + head + "' without a matching statement");
    } else {
      add_node(st, parse_expr({";"}));
      expect(st, ";");
    }
    return st;
  }

  // Parses tokens up to (not including) a terminator at bracket depth zero.
  std::size_t parse_expr(std::initializer_list<std::string_view> stops) {
    auto is_stop = [&] {
      for (auto s : stops)
        if (peek_is(s)) return true;
      return false;
    };
    auto expr = make(AstKind::Expr);
    const std::size_t start = pos_;
    while (true) {
      if (at_end()) error("unterminated expression");
      if (is_stop()) break;
      const Token& tok = peek();
      if (tok.surface == ";" || tok.surface == ")" || tok.surface == "}" || tok.surface == "]")
        error("unexpected '" + tok.surface + "' in expression");

      if (tok.kind == LexKind::Identifier && peek_is("(", 1)) {
        auto call = make(AstKind::Call);
        add_node(expr, call);
        add_wrapped(call);
        add_token(call);  // (
        while (!peek_is(")")) {
          add_node(call, parse_expr({",", ")"}));
          if (peek_is(",")) add_token(call);
        }
        expect(call, ")");
      } else if (tok.surface == "(") {
        add_token(expr);
        if (!peek_is(")")) add_node(expr, parse_expr({")"}));
        expect(expr, ")");
      } else if (tok.surface == "[") {
        add_token(expr);
        if (!peek_is("]")) add_node(expr, parse_expr({"]"}));
        expect(expr, "]");
      } else if (tok.surface == "{") {
        add_node(expr, parse_brace_in_expr());
      } else {
        add_wrapped(expr);
      }
    }
    if (pos_ == start) error("empty expression");
    return expr;
  }

  // Lambda bodies and anonymous blocks parse as blocks; array initialisers
  // fall back to a comma-separated expression list.
  std::size_t parse_brace_in_expr() {
    const std::size_t save_pos = pos_;
    const std::size_t save_nodes = tree_.nodes.size();
    try {
      return parse_block();
    } catch (const ParseError&) {
      pos_ = save_pos;
      tree_.nodes.resize(save_nodes);
    }
    auto init = make(AstKind::Expr);
    expect(init, "{");
    while (!peek_is("}")) {
      add_node(init, parse_expr({",", "}"}));
      if (peek_is(",")) add_token(init);
    }
    expect(init, "}");
    return init;
  }
};

}  // namespace detail

inline AstTree parse_method(const TokenSeq& tokens) {
  if (tokens.size() == 0) throw ParseError("empty input", 0);
  return detail::MethodParser(tokens).parse();
}

}  // namespace kgmn
