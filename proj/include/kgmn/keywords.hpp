#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "codegraph.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "params.hpp"
#include "vocab.hpp"

namespace kgmn {

enum class KeywordSource { Extractor, Random, TextRank, TfIdf, Reference };

inline std::string_view keyword_source_name(KeywordSource s) {
  switch (s) {
    case KeywordSource::Extractor: return "extractor";
    case KeywordSource::Random: return "random";
    case KeywordSource::TextRank: return "textrank";
    case KeywordSource::TfIdf: return "tfidf";
    case KeywordSource::Reference: return "reference";
  }
  return "?";
}

inline std::optional<KeywordSource> keyword_source_from_name(std::string_view s) {
  for (auto k : {KeywordSource::Extractor, KeywordSource::Random, KeywordSource::TextRank, KeywordSource::TfIdf,
                 KeywordSource::Reference})
    if (keyword_source_name(k) == s) return k;
  return std::nullopt;
}

// Ordered, duplicate-free keywords of one method. An empty selection is
// represented by the single NO-KEYWORD sentinel.
struct KeywordSet {
  std::string id;
  KeywordSource source = KeywordSource::Reference;
  Tokens words;
  std::vector<double> scores;

  bool is_sentinel() const { return words.size() == 1 && words.front() == kNoKeywordSymbol; }
  bool operator==(const KeywordSet&) const = default;
};

// Candidate keyword surfaces in source order, duplicates included.
inline Tokens candidate_sequence(const CodeGraph& g) {
  Tokens out;
  for (auto i : keyword_candidates(g)) out.push_back(g.nodes[i].label);
  return out;
}

inline Tokens distinct_in_order(const Tokens& seq) {
  Tokens out;
  std::unordered_set<std::string> seen;
  for (const auto& s : seq)
    if (seen.insert(s).second) out.push_back(s);
  return out;
}

// Builds a KeywordSet from chosen surfaces, reordering them by first
// occurrence in `order`.
inline KeywordSet make_keyword_set(const CodeGraph& g, KeywordSource source, const Tokens& order,
                                   const std::map<std::string, double>& chosen) {
  KeywordSet ks;
  ks.id = g.id;
  ks.source = source;
  for (const auto& s : distinct_in_order(order))
    if (auto it = chosen.find(s); it != chosen.end()) {
      ks.words.push_back(s);
      ks.scores.push_back(it->second);
    }
  if (ks.words.empty()) {
    ks.words = {std::string(kNoKeywordSymbol)};
    ks.scores = {0.0};
  }
  return ks;
}

// Top-k surfaces by score; ties go to the earlier first occurrence.
inline std::map<std::string, double> top_k(const Tokens& distinct, const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(distinct.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < std::min(k, idx.size()); ++i) out[distinct[idx[i]]] = scores[idx[i]];
  return out;
}

inline KeywordSet baseline_random(const CodeGraph& g, std::size_t k, nn::Rng& rng) {
  const auto seq = candidate_sequence(g);
  auto pool = distinct_in_order(seq);
  // partial Fisher-Yates
  const std::size_t take = std::min(k, pool.size());
  for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  std::map<std::string, double> chosen;
  for (std::size_t i = 0; i < take; ++i) chosen[pool[i]] = 1.0;
  return make_keyword_set(g, KeywordSource::Random, seq, chosen);
}

struct TextRankScores {
  Tokens vertices;  // distinct candidates, first-occurrence order
  std::vector<double> scores;
  std::size_t iterations = 0;
};

// Weighted undirected co-occurrence graph over the candidate sequence
// (window 2, self-pairs skipped), scored by damped power iteration. Vertices
// without neighbours spread their mass uniformly. Scores sum to 1.
inline TextRankScores textrank_scores(const Tokens& seq, double damping = 0.85, double tolerance = 1e-6,
                                      std::size_t max_iterations = 100) {
  TextRankScores out;
  out.vertices = distinct_in_order(seq);
  const std::size_t n = out.vertices.size();
  if (n == 0) return out;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[out.vertices[i]] = i;
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const auto a = index[seq[i]], b = index[seq[i + 1]];
    if (a == b) continue;
    w[a][b] += 1.0;
    w[b][a] += 1.0;
  }
  std::vector<double> strength(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) strength[i] = std::accumulate(w[i].begin(), w[i].end(), 0.0);

  const double nd = static_cast<double>(n);
  std::vector<double> s(n, 1.0 / nd), next(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double dangling = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (strength[j] == 0.0) dangling += s[j];
    for (std::size_t i = 0; i < n; ++i) {
      double in = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (w[j][i] != 0.0) in += w[j][i] / strength[j] * s[j];
      next[i] = (1.0 - damping) / nd + damping * (in + dangling / nd);
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - s[i]);
    s.swap(next);
    out.iterations = it + 1;
    if (change < tolerance) break;
  }
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  for (auto& v : s) v /= total;
  out.scores = std::move(s);
  return out;
}

inline KeywordSet baseline_textrank(const CodeGraph& g, std::size_t k) {
  const auto seq = candidate_sequence(g);
  const auto tr = textrank_scores(seq);
  return make_keyword_set(g, KeywordSource::TextRank, seq, top_k(tr.vertices, tr.scores, k));
}

// Document frequencies of candidate surfaces over a training corpus.
struct TfIdfModel {
  std::size_t documents = 0;
  std::unordered_map<std::string, std::size_t> df;

  static TfIdfModel fit(const std::vector<CodeGraph>& corpus) {
    TfIdfModel m;
    m.documents = corpus.size();
    for (const auto& g : corpus)
      for (const auto& s : distinct_in_order(candidate_sequence(g))) ++m.df[s];
    return m;
  }

  double idf(const std::string& s) const {
    auto it = df.find(s);
    const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((static_cast<double>(documents) + 1.0) / (d + 1.0)) + 1.0;
  }
};

inline KeywordSet baseline_tfidf(const TfIdfModel& model, const CodeGraph& g, std::size_t k) {
  const auto seq = candidate_sequence(g);
  const auto distinct = distinct_in_order(seq);
  std::unordered_map<std::string, double> counts;
  for (const auto& s : seq) counts[s] += 1.0;
  std::vector<double> scores;
  for (const auto& s : distinct) scores.push_back(counts[s] / static_cast<double>(seq.size()) * model.idf(s));
  return make_keyword_set(g, KeywordSource::TfIdf, seq, top_k(distinct, scores, k));
}

inline KeywordSet reference_keywords(const CodeGraph& g) {
  const auto seq = candidate_sequence(g);
  const std::unordered_set<std::string> name(g.name_subtokens.begin(), g.name_subtokens.end());
  std::map<std::string, double> chosen;
  for (const auto& s : seq)
    if (name.count(s)) chosen[s] = 1.0;
  return make_keyword_set(g, KeywordSource::Reference, seq, chosen);
}

// ROUGE of the keyword sequence against the method name.
inline RougeScores keyword_quality(const KeywordSet& ks, const Tokens& name) { return score(ks.words, name); }

inline RougeReport keyword_quality(const std::vector<KeywordSet>& sets, const std::vector<CodeGraph>& graphs) {
  if (sets.size() != graphs.size()) throw DataError("keyword sets and graphs differ in number");
  RougeReport rep;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].id != graphs[i].id) throw DataError("keyword set '" + sets[i].id + "' is out of order");
    rep.add(keyword_quality(sets[i], graphs[i].name_subtokens), sets[i].words == graphs[i].name_subtokens);
  }
  return rep;
}

inline nlohmann::json keyword_set_to_json(const KeywordSet& ks) {
  return {{"id", ks.id}, {"strategy", keyword_source_name(ks.source)}, {"keywords", ks.words}, {"scores", ks.scores}};
}

inline KeywordSet keyword_set_from_json(const nlohmann::json& j) {
  KeywordSet ks;
  try {
    ks.id = j.at("id").get<std::string>();
    auto src = keyword_source_from_name(j.at("strategy").get<std::string>());
    if (!src) throw DataError("unknown keyword strategy '" + j.at("strategy").get<std::string>() + "'");
    ks.source = *src;
    ks.words = j.at("keywords").get<Tokens>();
    ks.scores = j.value("scores", std::vector<double>(ks.words.size(), 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad keyword record: ") + e.what());
  }
  if (ks.words.empty()) throw DataError("keyword record '" + ks.id + "' has no keywords");
  return ks;
}

}  // namespace kgmn
