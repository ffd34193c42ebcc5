#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "codegraph.hpp"
#include "error.hpp"

namespace kgmn {

using Tokens = std::vector<std::string>;

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double f_measure(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline Prf make_prf(double overlap, double cand_total, double ref_total) {
  Prf out;
  out.precision = cand_total > 0.0 ? overlap / cand_total : 0.0;
  out.recall = ref_total > 0.0 ? overlap / ref_total : 0.0;
  out.f1 = f_measure(out.precision, out.recall);
  return out;
}

// ROUGE-N with clipped n-gram counts.
inline Prf rouge_n(const Tokens& cand, const Tokens& ref, std::size_t n) {
  if (n == 0) throw std::invalid_argument("rouge_n needs n >= 1");
  auto grams = [n](const Tokens& s) {
    std::map<Tokens, std::size_t> out;
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[Tokens(s.begin() + i, s.begin() + i + n)];
    return out;
  };
  const auto cg = grams(cand);
  const auto rg = grams(ref);
  std::size_t overlap = 0, ct = 0, rt = 0;
  for (const auto& [g, c] : cg) {
    ct += c;
    if (auto it = rg.find(g); it != rg.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [g, c] : rg) rt += c;
  return make_prf(static_cast<double>(overlap), static_cast<double>(ct), static_cast<double>(rt));
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline Prf rouge_l(const Tokens& cand, const Tokens& ref) {
  return make_prf(static_cast<double>(lcs_length(cand, ref)), static_cast<double>(cand.size()),
                  static_cast<double>(ref.size()));
}

struct RougeScores {
  Prf r1, r2, rl;
};

inline RougeScores score(const Tokens& cand, const Tokens& ref) {
  return RougeScores{rouge_n(cand, ref, 1), rouge_n(cand, ref, 2), rouge_l(cand, ref)};
}

// Macro averages over a group of examples.
struct RougeReport {
  std::size_t count = 0;
  RougeScores total;
  double exact_total = 0.0;

  void add(const RougeScores& s, bool exact) {
    ++count;
    auto acc = [](Prf& m, const Prf& v) {
      m.precision += v.precision;
      m.recall += v.recall;
      m.f1 += v.f1;
    };
    acc(total.r1, s.r1);
    acc(total.r2, s.r2);
    acc(total.rl, s.rl);
    exact_total += exact ? 1.0 : 0.0;
  }

  RougeScores mean() const {
    if (count == 0) return {};
    const double n = static_cast<double>(count);
    auto div = [n](const Prf& p) { return Prf{p.precision / n, p.recall / n, p.f1 / n}; };
    return RougeScores{div(total.r1), div(total.r2), div(total.rl)};
  }
  double exact_match() const { return count ? exact_total / static_cast<double>(count) : 0.0; }
};

inline bool is_template_method(const Tokens& name) {
  if (name.empty()) return false;
  if (name.front() == "set" || name.front() == "get" || name.front() == "is") return true;
  return name == Tokens{"to", "string"} || name == Tokens{"equals"} || name == Tokens{"hash", "code"};
}

struct CorpusReport {
  RougeReport overall;
  std::array<RougeReport, 5> by_shared;  // 0, 1, 2, 3, >=4 shared tokens
  RougeReport template_methods;
  RougeReport other_methods;
};

struct Prediction {
  std::string id;
  Tokens tokens;
};

// Scores predictions against the names of the reference graphs, matched by
// id. Every reference needs exactly one prediction.
inline CorpusReport evaluate_corpus(const std::vector<Prediction>& predictions,
                                    const std::vector<CodeGraph>& references) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions)
    if (!by_id.emplace(p.id, &p).second) throw DataError("duplicate prediction for id '" + p.id + "'");
  if (by_id.size() != references.size())
    throw DataError("predictions cover " + std::to_string(by_id.size()) + " ids but there are " +
                    std::to_string(references.size()) + " references");
  CorpusReport rep;
  for (const auto& g : references) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw DataError("no prediction for reference id '" + g.id + "'");
    const auto& cand = it->second->tokens;
    const auto s = score(cand, g.name_subtokens);
    const bool exact = cand == g.name_subtokens;
    rep.overall.add(s, exact);
    rep.by_shared[shared_bucket(shared_token_count(g))].add(s, exact);
    (is_template_method(g.name_subtokens) ? rep.template_methods : rep.other_methods).add(s, exact);
  }
  return rep;
}

inline nlohmann::json to_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

inline nlohmann::json to_json(const RougeReport& r) {
  const auto m = r.mean();
  return {{"count", r.count},
          {"rouge_1", to_json(m.r1)},
          {"rouge_2", to_json(m.r2)},
          {"rouge_l", to_json(m.rl)},
          {"exact_match", r.exact_match()}};
}

inline nlohmann::json to_json(const CorpusReport& c) {
  nlohmann::json buckets = nlohmann::json::array();
  const char* labels[] = {"0", "1", "2", "3", ">=4"};
  for (std::size_t b = 0; b < c.by_shared.size(); ++b) {
    auto j = to_json(c.by_shared[b]);
    j["shared_tokens"] = labels[b];
    buckets.push_back(std::move(j));
  }
  return {{"overall", to_json(c.overall)},
          {"by_shared_tokens", std::move(buckets)},
          {"template_methods", to_json(c.template_methods)},
          {"other_methods", to_json(c.other_methods)}};
}

}  // namespace kgmn
