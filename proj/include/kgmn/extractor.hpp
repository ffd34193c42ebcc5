#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "codegraph.hpp"
#include "ggnn.hpp"
#include "keywords.hpp"
#include "params.hpp"
#include "training.hpp"
#include "vocab.hpp"

namespace kgmn {

struct ExtractorLossConfig {
  bool printed_form = false;      // drop the (1-y) log(1-p) term
  bool positive_weighting = true;  // weight y=1 terms by #neg/#pos of the batch
};

// Stage one: GGNN encoder plus a per-node sigmoid head.
class ExtractorModel {
 public:
  ExtractorModel(const GgnnConfig& cfg, std::size_t vocab_size, std::uint64_t seed) {
    nn::Rng rng(seed);
    ggnn_ = Ggnn(params_, rng, cfg, vocab_size);
    weight_ = params_.add("extractor.weight", cfg.hidden, 1, nn::Init::Glorot, rng);
    bias_ = params_.add("extractor.bias", 1, 1, nn::Init::Zeros, rng);
  }
  ExtractorModel(const ExtractorModel&) = delete;
  ExtractorModel& operator=(const ExtractorModel&) = delete;
  ExtractorModel(ExtractorModel&&) = default;

  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }
  const Ggnn& ggnn() const noexcept { return ggnn_; }
  nn::ParamRef head_weight() const noexcept { return weight_; }
  nn::ParamRef head_bias() const noexcept { return bias_; }

  // y_hat = sigmoid(h W_e + b_e), one row per node.
  nn::Var probabilities(nn::Tape& t, const CodeGraph& g, const std::vector<std::size_t>& ids) {
    auto enc = ggnn_.encode(t, params_, g, ids);
    return probabilities(t, enc);
  }
  nn::Var probabilities(nn::Tape& t, const EncodedGraph& enc) {
    return nn::sigmoid(nn::add(nn::matmul(enc.h, t.param(params_[weight_])), t.param(params_[bias_])));
  }

  std::vector<double> predict(const CodeGraph& g, const Vocab& vocab) {
    nn::Tape t(false);
    auto p = probabilities(t, g, node_ids(g, vocab));
    return {p.value().values().begin(), p.value().values().end()};
  }

  nn::Var loss(nn::Tape& t, const CodeGraph& g, const Vocab& vocab, double positive_weight,
               const ExtractorLossConfig& cfg) {
    if (g.labels.size() != g.size()) throw DataError("graph '" + g.id + "' has no keyword labels");
    return nn::binary_cross_entropy(probabilities(t, g, node_ids(g, vocab)), g.labels,
                                    cfg.positive_weighting ? positive_weight : 1.0, cfg.printed_form);
  }

 private:
  nn::ParamStore params_;
  Ggnn ggnn_;
  nn::ParamRef weight_;
  nn::ParamRef bias_;
};

// Candidates above the threshold, or the top `fallback_k` distinct
// candidate surfaces when none pass; deduplicated in first-occurrence order.
inline KeywordSet select_keywords(const std::vector<double>& probs, const CodeGraph& g, double threshold = 0.5,
                                  std::size_t fallback_k = 4) {
  if (probs.size() != g.size()) throw std::invalid_argument("one probability per node is required");
  if (std::none_of(g.nodes.begin(), g.nodes.end(), [](const GraphNode& n) { return n.is_lexical(); }))
    throw DataError("graph '" + g.id + "' has no lexical nodes");
  const auto cands = keyword_candidates(g);
  Tokens order;
  std::map<std::string, double> best;  // highest probability per surface
  for (auto i : cands) {
    const auto& s = g.nodes[i].label;
    order.push_back(s);
    auto [it, fresh] = best.emplace(s, probs[i]);
    if (!fresh) it->second = std::max(it->second, probs[i]);
  }
  std::map<std::string, double> chosen;
  for (const auto& [s, p] : best)
    if (p > threshold) chosen.emplace(s, p);
  if (chosen.empty() && !best.empty()) {
    const auto distinct = distinct_in_order(order);
    std::vector<double> scores;
    for (const auto& s : distinct) scores.push_back(best[s]);
    chosen = top_k(distinct, scores, fallback_k);
  }
  return make_keyword_set(g, KeywordSource::Extractor, order, chosen);
}

struct NodeF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Threshold classification quality over every labelled node.
inline NodeF1 node_f1(ExtractorModel& model, const std::vector<CodeGraph>& graphs, const Vocab& vocab,
                      double threshold = 0.5) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& g : graphs) {
    const auto p = model.predict(g, vocab);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool pred = p[i] > threshold;
      const bool gold = g.labels[i] == 1;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
  }
  NodeF1 out;
  out.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = f_measure(out.precision, out.recall);
  return out;
}

inline TrainLog train_extractor(ExtractorModel& model, const std::vector<CodeGraph>& train,
                                const std::vector<CodeGraph>& valid, const Vocab& vocab,
                                const ExtractorLossConfig& loss_cfg, const TrainOptions& opt) {
  auto batch_step = [&](const std::vector<std::size_t>& batch) {
    std::size_t pos = 0, neg = 0;
    for (auto i : batch)
      for (int y : train[i].labels) (y ? pos : neg) += 1;
    const double weight = pos ? static_cast<double>(neg) / static_cast<double>(pos) : 1.0;
    double total = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto i : batch) {
      nn::Tape t;
      auto l = model.loss(t, train[i], vocab, weight, loss_cfg);
      total += l.scalar();
      t.backward(nn::scale(l, scale));
    }
    return total * scale;
  };
  std::function<std::optional<double>()> validate;
  if (!valid.empty()) validate = [&]() -> std::optional<double> { return node_f1(model, valid, vocab).f1; };
  return fit(model.params(), train.size(), batch_step, validate, opt);
}

inline std::vector<KeywordSet> extract_keywords(ExtractorModel& model, const std::vector<CodeGraph>& graphs,
                                                const Vocab& vocab, std::size_t k = 4) {
  std::vector<KeywordSet> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(select_keywords(model.predict(g, vocab), g, 0.5, k));
  return out;
}

}  // namespace kgmn
