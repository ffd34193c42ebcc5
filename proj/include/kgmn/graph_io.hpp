#pragma once

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "codegraph.hpp"
#include "error.hpp"

namespace kgmn {

using json = nlohmann::json;

namespace detail {

inline std::string_view node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Token: return "token";
    case NodeKind::Subtoken: return "subtoken";
    case NodeKind::Ast: return "ast";
  }
  return "?";
}

inline NodeKind node_kind_from_name(std::string_view s) {
  if (s == "token") return NodeKind::Token;
  if (s == "subtoken") return NodeKind::Subtoken;
  if (s == "ast") return NodeKind::Ast;
  throw DataError("unknown node kind '" + std::string(s) + "'");
}

template <class T>
T required(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T optional_field(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline json graph_to_json(const CodeGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json jn = {{"label", n.label}, {"kind", detail::node_kind_name(n.kind)}};
    if (n.is_lexical()) jn["lex"] = lex_kind_name(n.lex);
    nodes.push_back(std::move(jn));
  }
  json edges = json::array();
  for (std::size_t k = 0; k < kForwardEdgeTypes; ++k)
    for (const auto& e : g.edges[k])
      edges.push_back(json::array({edge_type_name(static_cast<EdgeType>(k)), e.src, e.dst}));
  return json{{"id", g.id},
              {"project", g.project},
              {"split", g.split},
              {"name_subtokens", g.name_subtokens},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)},
              {"masked", g.masked},
              {"labels", g.labels}};
}

// Reads both the pre-parsed ingestion form and serialized graphs. Missing
// labels are recomputed from the name subtokens.
inline CodeGraph graph_from_json(const json& j) {
  if (!j.is_object()) throw DataError("graph record must be an object");
  CodeGraph g;
  g.id = detail::optional_field<std::string>(j, "id", "");
  g.project = detail::optional_field<std::string>(j, "project", "");
  g.split = detail::optional_field<std::string>(j, "split", "");
  g.name_subtokens = detail::required<std::vector<std::string>>(j, "name_subtokens");
  if (g.name_subtokens.empty()) throw DataError("empty name_subtokens");
  for (auto& s : g.name_subtokens) s = to_lower(s);

  const auto& jnodes = j.find("nodes");
  if (jnodes == j.end() || !jnodes->is_array()) throw DataError("missing field 'nodes'");
  for (const auto& jn : *jnodes) {
    GraphNode n;
    n.label = detail::required<std::string>(jn, "label");
    n.kind = detail::node_kind_from_name(detail::required<std::string>(jn, "kind"));
    n.lex = n.is_lexical() ? lex_kind_from_name(detail::optional_field<std::string>(jn, "lex", "identifier"))
                           : LexKind::Punctuation;
    g.nodes.push_back(std::move(n));
  }

  const auto& jedges = j.find("edges");
  if (jedges == j.end() || !jedges->is_array()) throw DataError("missing field 'edges'");
  for (const auto& je : *jedges) {
    if (!je.is_array() || je.size() != 3 || !je[0].is_string() || !je[1].is_number_integer() ||
        !je[2].is_number_integer() || je[1].get<long long>() < 0 || je[2].get<long long>() < 0)
      throw DataError("edge must be [type, src, dst]");
    const auto name = je[0].get<std::string>();
    auto type = forward_edge_type_from_name(name);
    if (!type) throw DataError("unknown edge type '" + name + "'");
    g.edges_of(*type).push_back(Edge{je[1].get<std::size_t>(), je[2].get<std::size_t>()});
  }
  add_reverse_edges(g);

  g.masked = detail::optional_field<std::vector<std::size_t>>(j, "masked", {});
  g.labels = detail::optional_field<std::vector<int>>(j, "labels", {});
  validate_graph(g);
  if (g.labels.empty()) label_keywords(g, g.name_subtokens);
  return g;
}

inline std::string serialize_graph(const CodeGraph& g) { return graph_to_json(g).dump(); }

inline CodeGraph deserialize_graph(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
  return graph_from_json(j);
}

inline MethodRecord method_record_from_json(const json& j) {
  MethodRecord r;
  r.id = detail::optional_field<std::string>(j, "id", "");
  r.body = detail::required<std::string>(j, "body");
  r.name_subtokens = detail::required<std::vector<std::string>>(j, "name_subtokens");
  if (r.name_subtokens.empty()) throw DataError("empty name_subtokens");
  for (auto& s : r.name_subtokens) s = to_lower(s);
  r.project = detail::optional_field<std::string>(j, "project", "");
  r.split = detail::optional_field<std::string>(j, "split", "train");
  return r;
}

inline json method_record_to_json(const MethodRecord& r) {
  return json{{"id", r.id},
              {"body", r.body},
              {"name_subtokens", r.name_subtokens},
              {"project", r.project},
              {"split", r.split}};
}

// Calls fn(line_number, json) for every non-blank line; errors carry the
// file name and line number.
inline void for_each_json_line(const std::string& path,
                               const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(lineno, json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

// Graph from one dataset line: raw {body, ...} records are lexed, parsed and
// built; records carrying {nodes, edges} are taken as pre-parsed.
inline CodeGraph example_from_json(const json& j, std::size_t lineno) {
  CodeGraph g;
  if (j.contains("nodes")) {
    g = graph_from_json(j);
  } else {
    auto rec = method_record_from_json(j);
    g = build_graph(rec);
  }
  if (g.id.empty()) g.id = std::to_string(lineno);
  return g;
}

inline std::vector<CodeGraph> load_graphs(const std::string& path) {
  std::vector<CodeGraph> out;
  for_each_json_line(path, [&](std::size_t lineno, const json& j) { out.push_back(example_from_json(j, lineno)); });
  return out;
}

inline void write_graphs(const std::string& path, const std::vector<CodeGraph>& graphs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& g : graphs) out << serialize_graph(g) << '\n';
}

inline std::vector<CodeGraph> select_split(const std::vector<CodeGraph>& all, std::string_view split) {
  std::vector<CodeGraph> out;
  for (const auto& g : all)
    if (g.split == split) out.push_back(g);
  return out;
}

}  // namespace kgmn
