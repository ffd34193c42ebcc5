#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "kgmn/kgmn.hpp"

namespace kgmn::testing {

inline std::string source_path(const std::string& rel) { return std::string(KGMN_SOURCE_DIR) + "/" + rel; }

inline const std::vector<CodeGraph>& toy_graphs() {
  static const std::vector<CodeGraph> graphs = load_graphs(source_path("data/toy_corpus.jsonl"));
  return graphs;
}

inline RunConfig toy_config() {
  auto cfg = load_config(source_path("configs/toy.json"));
  cfg.data = source_path("data/toy_corpus.jsonl");
  return cfg;
}

inline GraphNode token(std::string label, LexKind lex = LexKind::Identifier) {
  return GraphNode{std::move(label), NodeKind::Token, lex};
}

inline GraphNode ast(AstKind k) { return GraphNode{std::string(ast_kind_name(k)), NodeKind::Ast, LexKind::Identifier}; }

// `return user name` under Statement -> Expr, named get_user_name: five
// nodes, two of them keywords.
inline CodeGraph five_node_graph() {
  CodeGraph g;
  g.id = "five";
  g.project = "p";
  g.split = "train";
  g.name_subtokens = {"get", "user", "name"};
  g.nodes = {token("return", LexKind::Keyword), token("user"), token("name"), ast(AstKind::Statement),
             ast(AstKind::Expr)};
  g.edges_of(EdgeType::NextToken) = {{0, 1}, {1, 2}};
  g.edges_of(EdgeType::Child) = {{3, 0}, {3, 4}, {4, 1}, {4, 2}};
  add_reverse_edges(g);
  label_keywords(g, g.name_subtokens);
  return g;
}

// Vocabulary holding every lexical label of the given graphs.
inline Vocab vocab_of(const std::vector<CodeGraph>& graphs) {
  Vocab v;
  for (const auto& g : graphs) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.nodes[i].is_lexical() && !g.is_masked(i)) v.add(g.nodes[i].label, 1);
    for (const auto& s : g.name_subtokens) v.add(s, 1);
  }
  return v;
}

// Random typed multigraph with `n` nodes; labels are only used through ids.
inline CodeGraph random_graph(nn::Rng& rng, std::size_t n) {
  CodeGraph g;
  g.id = "random";
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back(token("w" + std::to_string(i)));
  const std::size_t edges = rng.below(3 * n + 1);
  for (std::size_t e = 0; e < edges; ++e)
    g.edges[rng.below(kEdgeTypeCount)].push_back(Edge{rng.below(n), rng.below(n)});
  g.labels.assign(n, 0);
  return g;
}

// Node i of `g` becomes node perm[i].
inline CodeGraph permute_graph(const CodeGraph& g, const std::vector<std::size_t>& perm) {
  CodeGraph p = g;
  for (std::size_t i = 0; i < g.size(); ++i) p.nodes[perm[i]] = g.nodes[i];
  for (std::size_t k = 0; k < kEdgeTypeCount; ++k)
    for (std::size_t e = 0; e < g.edges[k].size(); ++e)
      p.edges[k][e] = Edge{perm[g.edges[k][e].src], perm[g.edges[k][e].dst]};
  return p;
}

inline std::vector<std::size_t> random_permutation(nn::Rng& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

inline std::vector<KeywordSet> reference_sets(const std::vector<CodeGraph>& graphs) {
  std::vector<KeywordSet> out;
  for (const auto& g : graphs) out.push_back(reference_keywords(g));
  return out;
}

}  // namespace kgmn::testing
