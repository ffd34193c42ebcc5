#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ast.hpp"
#include "error.hpp"
#include "lexer.hpp"
#include "text.hpp"

namespace kgmn {

inline constexpr std::string_view kNameMaskSymbol = "<name_mask>";

enum class NodeKind { Token, Subtoken, Ast };

// Forward types first; the reverse of type k is k + kForwardEdgeTypes.
enum class EdgeType : std::size_t {
  NextToken,
  SubToken,
  Child,
  LastLexicalUse,
  NextTokenReverse,
  SubTokenReverse,
  ChildReverse,
  LastLexicalUseReverse,
};

inline constexpr std::size_t kForwardEdgeTypes = 4;
inline constexpr std::size_t kEdgeTypeCount = 8;

inline std::string_view edge_type_name(EdgeType t) {
  static constexpr std::array<std::string_view, kEdgeTypeCount> kNames = {
      "NextToken",        "SubToken",        "Child",        "LastLexicalUse",
      "NextTokenReverse", "SubTokenReverse", "ChildReverse", "LastLexicalUseReverse"};
  return kNames[static_cast<std::size_t>(t)];
}

inline std::optional<EdgeType> forward_edge_type_from_name(std::string_view s) {
  for (std::size_t k = 0; k < kForwardEdgeTypes; ++k)
    if (edge_type_name(static_cast<EdgeType>(k)) == s) return static_cast<EdgeType>(k);
  return std::nullopt;
}

struct GraphNode {
  std::string label;  // lowercase surface for lexical nodes, kind name for AST nodes
  NodeKind kind = NodeKind::Token;
  LexKind lex = LexKind::Identifier;  // meaningful for lexical nodes only

  bool is_lexical() const noexcept { return kind != NodeKind::Ast; }
  bool is_subtoken() const noexcept { return kind == NodeKind::Subtoken; }
  bool operator==(const GraphNode&) const = default;
};

struct Edge {
  std::size_t src;
  std::size_t dst;
  bool operator==(const Edge&) const = default;
};

struct MethodRecord {
  std::string id;
  std::string body;
  std::vector<std::string> name_subtokens;
  std::string project;
  std::string split;  // train | valid | test
};

// One method as an input graph: tokens, subtokens and AST nodes joined by
// typed edges, with the method name masked and per-node keyword labels.
struct CodeGraph {
  std::string id;
  std::string project;
  std::string split;
  std::vector<std::string> name_subtokens;

  std::vector<GraphNode> nodes;
  std::array<std::vector<Edge>, kEdgeTypeCount> edges;
  std::vector<std::size_t> masked;  // node ids whose surface became the mask symbol
  std::vector<int> labels;          // y per node, 0/1

  const std::vector<Edge>& edges_of(EdgeType t) const { return edges[static_cast<std::size_t>(t)]; }
  std::vector<Edge>& edges_of(EdgeType t) { return edges[static_cast<std::size_t>(t)]; }
  std::size_t size() const noexcept { return nodes.size(); }
  bool is_masked(std::size_t node) const {
    return std::find(masked.begin(), masked.end(), node) != masked.end();
  }

  bool operator==(const CodeGraph&) const = default;
};

inline void add_reverse_edges(CodeGraph& g) {
  for (std::size_t k = 0; k < kForwardEdgeTypes; ++k) {
    auto& rev = g.edges[k + kForwardEdgeTypes];
    rev.clear();
    rev.reserve(g.edges[k].size());
    for (const auto& e : g.edges[k]) rev.push_back(Edge{e.dst, e.src});
  }
}

// Token nodes in NextToken order.
inline std::vector<std::size_t> token_order(const CodeGraph& g) {
  std::vector<std::size_t> tokens;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.nodes[i].kind == NodeKind::Token) tokens.push_back(i);
  const auto& next = g.edges_of(EdgeType::NextToken);
  if (tokens.size() <= 1 || next.empty()) return tokens;
  std::unordered_map<std::size_t, std::size_t> succ;
  std::unordered_set<std::size_t> has_pred;
  for (const auto& e : next) {
    succ[e.src] = e.dst;
    has_pred.insert(e.dst);
  }
  std::size_t head = tokens.front();
  for (auto t : tokens)
    if (!has_pred.count(t)) {
      head = t;
      break;
    }
  std::vector<std::size_t> order{head};
  while (order.size() < tokens.size()) {
    auto it = succ.find(order.back());
    if (it == succ.end()) break;
    order.push_back(it->second);
  }
  return order;
}

// Subtoken children of each token node, in edge order.
inline std::unordered_map<std::size_t, std::vector<std::size_t>> subtoken_children(const CodeGraph& g) {
  std::unordered_map<std::size_t, std::vector<std::size_t>> out;
  for (const auto& e : g.edges_of(EdgeType::SubToken)) out[e.src].push_back(e.dst);
  return out;
}

// Lexical nodes in source order: each token followed by its subtokens.
inline std::vector<std::size_t> lexical_order(const CodeGraph& g) {
  auto subs = subtoken_children(g);
  std::vector<std::size_t> out;
  for (auto t : token_order(g)) {
    out.push_back(t);
    if (auto it = subs.find(t); it != subs.end())
      out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

// Nodes that may become keywords: identifier material at subtoken
// granularity (a token's subtokens if it was split, otherwise the token
// itself), never the mask and never pure numbers.
inline std::vector<std::size_t> keyword_candidates(const CodeGraph& g) {
  auto subs = subtoken_children(g);
  std::vector<std::size_t> out;
  for (auto t : token_order(g)) {
    const auto& node = g.nodes[t];
    if (node.lex != LexKind::Identifier || g.is_masked(t)) continue;
    auto it = subs.find(t);
    if (it == subs.end() || it->second.empty()) {
      if (!is_all_digits(node.label)) out.push_back(t);
      continue;
    }
    for (auto s : it->second)
      if (!is_all_digits(g.nodes[s].label)) out.push_back(s);
  }
  return out;
}

inline void label_keywords(CodeGraph& g, const std::vector<std::string>& name_subtokens) {
  const std::unordered_set<std::string> name(name_subtokens.begin(), name_subtokens.end());
  g.labels.assign(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& node = g.nodes[i];
    if (!node.is_lexical() || g.is_masked(i)) continue;
    g.labels[i] = name.count(node.label) ? 1 : 0;
  }
}

// Throws ConsistencyError on the first broken structural invariant.
inline void validate_graph(const CodeGraph& g) {
  const std::size_t n = g.size();
  if (n == 0) throw ConsistencyError("graph '" + g.id + "' has no nodes");
  for (std::size_t k = 0; k < kEdgeTypeCount; ++k)
    for (const auto& e : g.edges[k])
      if (e.src >= n || e.dst >= n)
        throw ConsistencyError(std::string(edge_type_name(static_cast<EdgeType>(k))) +
                               " edge out of range in graph '" + g.id + "'");
  if (!g.labels.empty() && g.labels.size() != n)
    throw ConsistencyError("label count does not match node count in graph '" + g.id + "'");
  for (auto m : g.masked) {
    if (m >= n || g.nodes[m].label != kNameMaskSymbol)
      throw ConsistencyError("masked node " + std::to_string(m) + " does not carry the mask symbol");
  }

  std::size_t token_count = 0;
  for (const auto& node : g.nodes) token_count += node.kind == NodeKind::Token;
  if (token_count == 0) throw ConsistencyError("graph '" + g.id + "' has no token nodes");

  const auto& next = g.edges_of(EdgeType::NextToken);
  if (next.size() != token_count - 1)
    throw ConsistencyError("NextToken edges do not form a path over the tokens of '" + g.id + "'");
  for (const auto& e : next)
    if (g.nodes[e.src].kind != NodeKind::Token || g.nodes[e.dst].kind != NodeKind::Token)
      throw ConsistencyError("NextToken edge touches a non-token node in '" + g.id + "'");
  if (token_order(g).size() != token_count)
    throw ConsistencyError("NextToken edges do not form a single path in '" + g.id + "'");

  std::vector<int> sub_in(n, 0);
  for (const auto& e : g.edges_of(EdgeType::SubToken)) {
    if (g.nodes[e.src].kind != NodeKind::Token || g.nodes[e.dst].kind != NodeKind::Subtoken)
      throw ConsistencyError("SubToken edge must link a token to a subtoken in '" + g.id + "'");
    ++sub_in[e.dst];
  }
  for (std::size_t i = 0; i < n; ++i)
    if (g.nodes[i].kind == NodeKind::Subtoken && sub_in[i] != 1)
      throw ConsistencyError("subtoken node " + std::to_string(i) + " needs exactly one SubToken edge");

  std::vector<int> child_in(n, 0);
  for (const auto& e : g.edges_of(EdgeType::Child)) {
    if (g.nodes[e.src].kind != NodeKind::Ast)
      throw ConsistencyError("Child edge from a non-AST node in '" + g.id + "'");
    if (++child_in[e.dst] > 1)
      throw ConsistencyError("node " + std::to_string(e.dst) + " has two AST parents");
  }

  for (std::size_t k = 0; k < kForwardEdgeTypes; ++k) {
    const auto& fwd = g.edges[k];
    const auto& rev = g.edges[k + kForwardEdgeTypes];
    if (fwd.size() != rev.size())
      throw ConsistencyError("reverse edges missing for " +
                             std::string(edge_type_name(static_cast<EdgeType>(k))));
  }

  // reachability from token nodes over all edge types
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& list : g.edges)
    for (const auto& e : list) adj[e.src].push_back(e.dst);
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i)
    if (g.nodes[i].kind == NodeKind::Token) {
      seen[i] = 1;
      stack.push_back(i);
    }
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (auto v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw ConsistencyError("node " + std::to_string(i) + " unreachable from tokens");
}

// Assembles the graph from a lexed and parsed method. Node layout: tokens in
// source order, then subtokens grouped by token, then AST nodes.
inline CodeGraph build_graph(const TokenSeq& tokens, const AstTree& ast) {
  const std::size_t n_tok = tokens.size();
  (void)ast.token_parents(n_tok);  // throws on leaf/token mismatch
  if (ast.name_token >= n_tok) throw ConsistencyError("method name token out of range");

  CodeGraph g;
  const std::string declared = tokens[ast.name_token].surface;

  g.nodes.reserve(n_tok * 2 + ast.nodes.size());
  for (std::size_t i = 0; i < n_tok; ++i) {
    const auto& tok = tokens[i];
    GraphNode node{to_lower(tok.surface), NodeKind::Token, tok.kind};
    if (tok.kind == LexKind::Identifier && tok.surface == declared) {
      node.label = std::string(kNameMaskSymbol);
      g.masked.push_back(i);
    }
    g.nodes.push_back(std::move(node));
  }
  for (std::size_t i = 0; i + 1 < n_tok; ++i) g.edges_of(EdgeType::NextToken).push_back(Edge{i, i + 1});

  for (std::size_t i = 0; i < n_tok; ++i) {
    if (tokens[i].kind != LexKind::Identifier || g.is_masked(i)) continue;
    auto parts = split_subtokens(tokens[i].surface);
    if (parts.size() == 1 && parts.front() == g.nodes[i].label) continue;
    for (auto& p : parts) {
      g.nodes.push_back(GraphNode{std::move(p), NodeKind::Subtoken, LexKind::Identifier});
      g.edges_of(EdgeType::SubToken).push_back(Edge{i, g.nodes.size() - 1});
    }
  }

  // AST nodes in preorder
  std::vector<std::size_t> ast_id(ast.nodes.size());
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack{ast.root};
  while (!stack.empty()) {
    auto id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& ch = ast.nodes[id].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it)
      if (!it->is_token) stack.push_back(it->index);
  }
  if (order.size() != ast.nodes.size()) throw ConsistencyError("AST is not a single tree");
  for (auto id : order) {
    ast_id[id] = g.nodes.size();
    g.nodes.push_back(GraphNode{std::string(ast_kind_name(ast.nodes[id].kind)), NodeKind::Ast,
                                LexKind::Punctuation});
  }
  for (auto id : order)
    for (const auto& ch : ast.nodes[id].children)
      g.edges_of(EdgeType::Child).push_back(Edge{ast_id[id], ch.is_token ? ch.index : ast_id[ch.index]});

  // each identifier use points back at its most recent prior use
  std::unordered_map<std::string, std::size_t> last_use;
  for (std::size_t i = 0; i < n_tok; ++i) {
    if (tokens[i].kind != LexKind::Identifier) continue;
    const auto& key = g.nodes[i].label;
    if (auto it = last_use.find(key); it != last_use.end())
      g.edges_of(EdgeType::LastLexicalUse).push_back(Edge{i, it->second});
    last_use[key] = i;
  }

  add_reverse_edges(g);
  g.labels.assign(g.size(), 0);
  return g;
}

inline CodeGraph build_graph(const MethodRecord& rec) {
  if (rec.name_subtokens.empty()) throw DataError("method '" + rec.id + "' has no name subtokens");
  auto tokens = tokenize_method(rec.body);
  auto ast = parse_method(tokens);
  CodeGraph g = build_graph(tokens, ast);
  g.id = rec.id;
  g.project = rec.project;
  g.split = rec.split;
  for (const auto& s : rec.name_subtokens) g.name_subtokens.push_back(to_lower(s));
  label_keywords(g, g.name_subtokens);
  validate_graph(g);
  return g;
}

// Distinct lowercase lexical surfaces of the (masked) body.
inline std::unordered_set<std::string> body_surfaces(const CodeGraph& g) {
  std::unordered_set<std::string> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.nodes[i].is_lexical() && !g.is_masked(i)) out.insert(g.nodes[i].label);
  return out;
}

// Number of distinct name subtokens that also occur in the body.
inline std::size_t shared_token_count(const CodeGraph& g) {
  const auto body = body_surfaces(g);
  std::set<std::string> shared;
  for (const auto& s : g.name_subtokens)
    if (body.count(s)) shared.insert(s);
  return shared.size();
}

inline std::size_t shared_bucket(std::size_t shared) { return std::min<std::size_t>(shared, 4); }

struct SharedTokenStats {
  std::size_t name_tokens = 0;
  std::size_t found_tokens = 0;
  double ratio = 0.0;                       // found / name tokens over the corpus
  std::array<std::size_t, 5> buckets{};     // methods sharing 0,1,2,3,>=4 tokens
};

inline SharedTokenStats shared_token_stats(const std::vector<CodeGraph>& corpus) {
  if (corpus.empty()) throw DataError("shared-token statistics need a non-empty corpus");
  SharedTokenStats st;
  for (const auto& g : corpus) {
    const auto body = body_surfaces(g);
    for (const auto& s : g.name_subtokens) {
      ++st.name_tokens;
      st.found_tokens += body.count(s) ? 1 : 0;
    }
    ++st.buckets[shared_bucket(shared_token_count(g))];
  }
  st.ratio = st.name_tokens ? static_cast<double>(st.found_tokens) / static_cast<double>(st.name_tokens) : 0.0;
  return st;
}

}  // namespace kgmn
