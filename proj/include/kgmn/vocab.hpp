#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ast.hpp"
#include "codegraph.hpp"
#include "error.hpp"

namespace kgmn {

inline constexpr std::string_view kNoKeywordSymbol = "<no_keyword>";

// Surface <-> id table shared by node embeddings, keywords and the decoder.
// Ids 0-5 are the special symbols, followed by the AST kind labels, followed
// by retained lexical surfaces.
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kNameMask = 4;
  static constexpr std::size_t kNoKeyword = 5;
  static constexpr std::size_t kSpecialCount = 6;

  Vocab() {
    for (std::string_view s : {std::string_view("<pad>"), std::string_view("<s>"), std::string_view("</s>"),
                               std::string_view("<unk>"), kNameMaskSymbol, kNoKeywordSymbol})
      push(std::string(s), 0);
    for (std::size_t k = 0; k < kAstKindCount; ++k) push(std::string(ast_kind_name(static_cast<AstKind>(k))), 0);
  }

  std::size_t size() const noexcept { return surfaces_.size(); }
  bool contains(std::string_view s) const { return ids_.count(std::string(s)) > 0; }
  std::size_t id(std::string_view s) const {
    auto it = ids_.find(std::string(s));
    return it == ids_.end() ? kUnk : it->second;
  }
  const std::string& surface(std::size_t id) const { return surfaces_.at(id); }
  std::size_t frequency(std::size_t id) const { return freq_.at(id); }
  static bool is_special(std::size_t id) noexcept { return id < kSpecialCount; }

  // Appends a surface unless already present; returns its id.
  std::size_t add(const std::string& s, std::size_t frequency = 0) {
    if (auto it = ids_.find(s); it != ids_.end()) return it->second;
    return push(s, frequency);
  }

  bool operator==(const Vocab& o) const { return surfaces_ == o.surfaces_ && freq_ == o.freq_; }

  nlohmann::json to_json() const {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t i = 0; i < size(); ++i) entries.push_back(nlohmann::json::array({surfaces_[i], freq_[i]}));
    return entries;
  }

  static Vocab from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw DataError("vocabulary must be an array of [surface, frequency] pairs");
    Vocab base;
    Vocab v;
    v.surfaces_.clear();
    v.freq_.clear();
    v.ids_.clear();
    for (const auto& e : j) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number_integer())
        throw DataError("vocabulary entry must be [surface, frequency]");
      const auto s = e[0].get<std::string>();
      if (v.ids_.count(s)) throw DataError("duplicate vocabulary entry '" + s + "'");
      v.push(s, e[1].get<std::size_t>());
    }
    if (v.size() < base.size())
      throw DataError("vocabulary is missing reserved entries");
    for (std::size_t i = 0; i < base.size(); ++i)
      if (v.surfaces_[i] != base.surfaces_[i])
        throw DataError("vocabulary entry " + std::to_string(i) + " should be '" + base.surfaces_[i] + "'");
    return v;
  }

 private:
  std::size_t push(std::string s, std::size_t frequency) {
    ids_.emplace(s, surfaces_.size());
    surfaces_.push_back(std::move(s));
    freq_.push_back(frequency);
    return surfaces_.size() - 1;
  }

  std::vector<std::string> surfaces_;
  std::vector<std::size_t> freq_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Counts every unmasked lexical surface and name subtoken of the training
// graphs; surfaces seen at least min_count times are kept, most frequent
// first, ties in lexicographic order.
inline Vocab build_vocab(const std::vector<CodeGraph>& train, std::size_t min_count = 5) {
  std::map<std::string, std::size_t> counts;
  for (const auto& g : train) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.nodes[i].is_lexical() && !g.is_masked(i)) ++counts[g.nodes[i].label];
    for (const auto& s : g.name_subtokens) ++counts[s];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [s, c] : counts)
    if (c >= min_count) kept.emplace_back(s, c);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [s, c] : kept) v.add(s, c);
  return v;
}

// Vocabulary id of every graph node; masked nodes map to the mask symbol.
inline std::vector<std::size_t> node_ids(const CodeGraph& g, const Vocab& vocab) {
  std::vector<std::size_t> ids(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) ids[i] = g.is_masked(i) ? Vocab::kNameMask : vocab.id(g.nodes[i].label);
  return ids;
}

}  // namespace kgmn
