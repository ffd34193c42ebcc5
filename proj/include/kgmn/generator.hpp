#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "autodiff.hpp"
#include "cells.hpp"
#include "codegraph.hpp"
#include "ggnn.hpp"
#include "keywords.hpp"
#include "metrics.hpp"
#include "params.hpp"
#include "training.hpp"
#include "vocab.hpp"

namespace kgmn {

struct GeneratorConfig {
  bool use_key_gate = true;
  bool use_graph_gate = true;
  bool use_dual_attention = true;
  bool tie_keyword_embeddings = true;
  std::size_t max_decode_length = 8;
  std::size_t beam_width = 1;
  bool teacher_forcing = true;
};

// Extended output space of one example: vocabulary ids first, then the
// example's out-of-vocabulary lexical surfaces.
struct CopySource {
  std::size_t vocab_size = 0;
  std::vector<std::size_t> node_ids;       // vocabulary id per node
  std::vector<std::size_t> lexical_nodes;  // unmasked lexical nodes
  std::vector<std::size_t> lexical_ext;    // extended id of each of them
  Tokens oov;

  std::size_t ext_size() const noexcept { return vocab_size + oov.size(); }

  std::optional<std::size_t> ext_id(const std::string& s, const Vocab& vocab) const {
    if (vocab.contains(s)) return vocab.id(s);
    for (std::size_t i = 0; i < oov.size(); ++i)
      if (oov[i] == s) return vocab_size + i;
    return std::nullopt;
  }

  std::string surface(std::size_t ext, const Vocab& vocab) const {
    return ext < vocab_size ? vocab.surface(ext) : oov.at(ext - vocab_size);
  }
};

inline CopySource make_copy_source(const CodeGraph& g, const Vocab& vocab) {
  CopySource cs;
  cs.vocab_size = vocab.size();
  cs.node_ids = node_ids(g, vocab);
  std::unordered_map<std::string, std::size_t> oov_index;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.nodes[i].is_lexical() || g.is_masked(i)) continue;
    const auto& s = g.nodes[i].label;
    cs.lexical_nodes.push_back(i);
    if (vocab.contains(s)) {
      cs.lexical_ext.push_back(vocab.id(s));
      continue;
    }
    auto [it, fresh] = oov_index.emplace(s, cs.oov.size());
    if (fresh) cs.oov.push_back(s);
    cs.lexical_ext.push_back(cs.vocab_size + it->second);
  }
  return cs;
}

struct KeywordEncoding {
  nn::Var h;    // n x d, [forward : backward] per keyword
  nn::Var r_k;  // 1 x d
};

struct GatedStates {
  nn::Var nodes;     // h'
  nn::Var keywords;  // h^k'
};

struct DecoderState {
  nn::Var s;
  nn::Var cell;
};

// Per-example attention inputs; the memory-side halves of W_a [s : h] are
// computed once per example.
struct AttentionMemory {
  nn::Var nodes;
  nn::Var node_keys;
  nn::Var keywords;
  nn::Var keyword_keys;
};

struct StepResult {
  DecoderState state;
  nn::Var context;          // c_t
  nn::Var node_attention;   // alpha^t, |V| x 1
  nn::Var prob;             // P(w) over the extended space, ext x 1
  nn::Var p_gen;            // 1 x 1
};

struct DecodeResult {
  Tokens tokens;
  std::vector<double> p_gen;
  double log_prob = 0.0;
};

class GeneratorModel {
 public:
  GeneratorModel(const GgnnConfig& gcfg, const GeneratorConfig& cfg, std::size_t vocab_size, std::uint64_t seed)
      : cfg_(cfg), vocab_size_(vocab_size) {
    if (gcfg.hidden % 2 != 0) throw std::invalid_argument("hidden size must be even for the keyword BiLSTM");
    if (cfg.beam_width == 0) throw std::invalid_argument("beam width must be at least 1");
    nn::Rng rng(seed);
    const std::size_t d = gcfg.hidden;
    d_ = d;
    ggnn_ = Ggnn(params_, rng, gcfg, vocab_size);
    auto& ps = params_;
    if (!cfg.tie_keyword_embeddings)
      keyword_embedding_ = ps.add("keywords.embedding", vocab_size, d, nn::Init::Embedding, rng);
    kw_forward_ = nn::LstmCell::create(ps, rng, "keywords.forward", d, d / 2);
    kw_backward_ = nn::LstmCell::create(ps, rng, "keywords.backward", d, d / 2);
    kw_proj_ = ps.add("keywords.state_proj", 2 * d, d, nn::Init::Glorot, rng);
    if (cfg.use_key_gate) {
      key_gate_node_ = ps.add("gate.key.node", d, d, nn::Init::Glorot, rng);
      key_gate_state_ = ps.add("gate.key.state", d, d, nn::Init::Glorot, rng);
    }
    if (cfg.use_graph_gate) {
      graph_gate_keyword_ = ps.add("gate.graph.keyword", d, d, nn::Init::Glorot, rng);
      graph_gate_state_ = ps.add("gate.graph.state", d, d, nn::Init::Glorot, rng);
    }
    init_ = ps.add("decoder.init", d, d, nn::Init::Glorot, rng);
    decoder_ = nn::LstmCell::create(ps, rng, "decoder.lstm", d, d);
    node_att_ = Attention::create(ps, rng, "attention.node", d);
    if (cfg.use_dual_attention) keyword_att_ = Attention::create(ps, rng, "attention.keyword", d);
    context_ = ps.add("decoder.context", cfg.use_dual_attention ? 2 * d : d, d, nn::Init::Glorot, rng);
    out_hidden_ = nn::Linear::create(ps, rng, "output.hidden", 2 * d, d);
    out_vocab_ = nn::Linear::create(ps, rng, "output.vocab", d, vocab_size);
    switch_state_ = ps.add("switch.state", d, 1, nn::Init::Glorot, rng);
    switch_context_ = ps.add("switch.context", d, 1, nn::Init::Glorot, rng);
    switch_input_ = ps.add("switch.input", d, 1, nn::Init::Glorot, rng);
    switch_bias_ = ps.add("switch.bias", 1, 1, nn::Init::Zeros, rng);
  }
  GeneratorModel(const GeneratorModel&) = delete;
  GeneratorModel& operator=(const GeneratorModel&) = delete;
  GeneratorModel(GeneratorModel&&) = default;

  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }
  const GeneratorConfig& config() const noexcept { return cfg_; }
  GeneratorConfig& config() noexcept { return cfg_; }
  const Ggnn& ggnn() const noexcept { return ggnn_; }
  std::size_t hidden() const noexcept { return d_; }

  nn::Var embed(nn::Tape& t, std::vector<std::size_t> ids) {
    return nn::gather_rows(t.param(params_[ggnn_.embedding()]), std::move(ids));
  }

  nn::Var embed_keywords(nn::Tape& t, std::vector<std::size_t> ids) {
    auto table = keyword_embedding_.valid() ? keyword_embedding_ : ggnn_.embedding();
    return nn::gather_rows(t.param(params_[table]), std::move(ids));
  }

  static std::vector<std::size_t> keyword_ids(const Tokens& words, const Vocab& vocab) {
    std::vector<std::size_t> ids;
    for (const auto& w : words) ids.push_back(vocab.id(w));
    if (ids.empty()) ids.push_back(Vocab::kNoKeyword);
    return ids;
  }

  // BiLSTM over the keyword embeddings; r_k projects [h_1 : h_n] to d.
  KeywordEncoding encode_keywords(nn::Tape& t, const std::vector<std::size_t>& ids) {
    if (ids.empty()) throw std::invalid_argument("encode_keywords needs at least one keyword");
    const std::size_t n = ids.size(), half = d_ / 2;
    nn::Var x = embed_keywords(t, ids);
    std::vector<nn::Var> fwd(n), bwd(n);
    nn::Var h = t.constant(nn::Matrix(1, half)), c = t.constant(nn::Matrix(1, half));
    for (std::size_t i = 0; i < n; ++i) {
      std::tie(h, c) = kw_forward_(t, params_, nn::slice_rows(x, i, 1), h, c);
      fwd[i] = h;
    }
    h = t.constant(nn::Matrix(1, half));
    c = t.constant(nn::Matrix(1, half));
    for (std::size_t i = n; i-- > 0;) {
      std::tie(h, c) = kw_backward_(t, params_, nn::slice_rows(x, i, 1), h, c);
      bwd[i] = h;
    }
    nn::Var hk = nn::concat_cols(n == 1 ? fwd[0] : nn::concat_rows(fwd), n == 1 ? bwd[0] : nn::concat_rows(bwd));
    nn::Var ends = nn::concat_cols(nn::slice_rows(hk, 0, 1), nn::slice_rows(hk, n - 1, 1));
    return KeywordEncoding{hk, nn::matmul(ends, t.param(params_[kw_proj_]))};
  }

  // KeyGate_u = sigmoid(h_u W_g + r_k U_g), GraphGate_i = sigmoid(h^k_i W_k + r_g U_k).
  GatedStates dual_selective_gate(nn::Tape& t, const EncodedGraph& enc, const KeywordEncoding& kenc) {
    GatedStates out{enc.h, kenc.h};
    if (cfg_.use_key_gate) {
      nn::Var gate = nn::sigmoid(nn::add(nn::matmul(enc.h, t.param(params_[key_gate_node_])),
                                         nn::matmul(kenc.r_k, t.param(params_[key_gate_state_]))));
      out.nodes = nn::mul(enc.h, gate);
    }
    if (cfg_.use_graph_gate) {
      nn::Var gate = nn::sigmoid(nn::add(nn::matmul(kenc.h, t.param(params_[graph_gate_keyword_])),
                                         nn::matmul(enc.r_g, t.param(params_[graph_gate_state_]))));
      out.keywords = nn::mul(kenc.h, gate);
    }
    return out;
  }

  AttentionMemory attention_memory(nn::Tape& t, const GatedStates& gated) {
    AttentionMemory m;
    m.nodes = gated.nodes;
    m.node_keys = node_att_.keys(t, params_, gated.nodes, d_);
    if (cfg_.use_dual_attention) {
      m.keywords = gated.keywords;
      m.keyword_keys = keyword_att_.keys(t, params_, gated.keywords, d_);
    }
    return m;
  }

  // s_0 = tanh(r_g W_init), zero cell.
  DecoderState initial_state(nn::Tape& t, nn::Var r_g) {
    return DecoderState{nn::tanh(nn::matmul(r_g, t.param(params_[init_]))), t.constant(nn::Matrix(1, d_))};
  }

  // LSTM update, node attention and (optionally) keyword attention, fused
  // into c_t = [c^n : c^k] U_c.
  StepResult decoder_step(nn::Tape& t, const DecoderState& prev, nn::Var input, const AttentionMemory& mem) {
    StepResult r;
    auto [s, cell] = decoder_(t, params_, input, prev.s, prev.cell);
    r.state = DecoderState{s, cell};
    r.node_attention = node_att_.weights(t, params_, s, mem.node_keys, d_);
    nn::Var context = nn::matmul(nn::transpose(r.node_attention), mem.nodes);
    if (cfg_.use_dual_attention) {
      nn::Var kw_alpha = keyword_att_.weights(t, params_, s, mem.keyword_keys, d_);
      context = nn::concat_cols(context, nn::matmul(nn::transpose(kw_alpha), mem.keywords));
    }
    r.context = nn::matmul(context, t.param(params_[context_]));
    return r;
  }

  // P(w) = P_gen P_vocab(w) + (1 - P_gen) P_copy(w); the copy part spreads
  // node attention over unmasked lexical nodes, renormalized.
  void output_distribution(nn::Tape& t, StepResult& r, nn::Var input, const CopySource& src,
                           std::optional<double> force_p_gen = std::nullopt) {
    nn::Var hidden = out_hidden_(t, params_, nn::concat_cols(r.state.s, r.context));
    nn::Var p_vocab = nn::transpose(nn::softmax(out_vocab_(t, params_, hidden)));
    if (!src.oov.empty()) p_vocab = nn::concat_rows({p_vocab, t.constant(nn::Matrix(src.oov.size(), 1))});
    nn::Var logit = nn::add(nn::add(nn::matmul(r.state.s, t.param(params_[switch_state_])),
                                    nn::matmul(r.context, t.param(params_[switch_context_]))),
                            nn::add(nn::matmul(input, t.param(params_[switch_input_])),
                                    t.param(params_[switch_bias_])));
    r.p_gen = force_p_gen ? t.constant(nn::Matrix(1, 1, *force_p_gen)) : nn::sigmoid(logit);
    if (src.lexical_nodes.empty()) {
      r.p_gen = t.constant(nn::Matrix(1, 1, 1.0));
      r.prob = p_vocab;
      return;
    }
    nn::Var alpha = nn::gather_rows(r.node_attention, src.lexical_nodes);
    nn::Var p_nodes = nn::mul(alpha, nn::reciprocal(nn::sum_all(alpha)));
    nn::Var p_copy = nn::scatter_add_rows(p_nodes, src.lexical_ext, src.ext_size());
    r.prob = nn::add(nn::mul(p_vocab, r.p_gen), nn::mul(p_copy, nn::one_minus(r.p_gen)));
  }

  struct Prepared {
    EncodedGraph enc;
    KeywordEncoding kenc;
    GatedStates gated;
    AttentionMemory mem;
    CopySource src;
  };

  Prepared prepare(nn::Tape& t, const CodeGraph& g, const Tokens& keywords, const Vocab& vocab) {
    Prepared p;
    p.src = make_copy_source(g, vocab);
    p.enc = ggnn_.encode(t, params_, g, p.src.node_ids);
    p.kenc = encode_keywords(t, keyword_ids(keywords, vocab));
    p.gated = dual_selective_gate(t, p.enc, p.kenc);
    p.mem = attention_memory(t, p.gated);
    return p;
  }

  // Target ids: name subtokens then EOS. Tokens neither in the vocabulary nor
  // copyable become UNK and are counted in `unscorable`.
  std::vector<std::size_t> target_ids(const CodeGraph& g, const CopySource& src, const Vocab& vocab,
                                      std::size_t* unscorable = nullptr) const {
    std::vector<std::size_t> out;
    for (const auto& s : g.name_subtokens) {
      auto id = src.ext_id(s, vocab);
      if (!id && unscorable) ++*unscorable;
      out.push_back(id.value_or(Vocab::kUnk));
    }
    out.push_back(Vocab::kEos);
    return out;
  }

  std::size_t input_id(std::size_t ext) const noexcept { return ext < vocab_size_ ? ext : Vocab::kUnk; }

  // Mean per-step negative log likelihood of the target sequence.
  nn::Var loss(nn::Tape& t, const CodeGraph& g, const Tokens& keywords, const Vocab& vocab,
               std::size_t* unscorable = nullptr) {
    Prepared p = prepare(t, g, keywords, vocab);
    const auto target = target_ids(g, p.src, vocab, unscorable);
    DecoderState state = initial_state(t, p.enc.r_g);
    std::size_t prev = Vocab::kBos;
    std::vector<nn::Var> step_losses;
    for (auto gold : target) {
      nn::Var input = embed(t, {input_id(prev)});
      StepResult r = decoder_step(t, state, input, p.mem);
      output_distribution(t, r, input, p.src);
      step_losses.push_back(nn::neg_log(nn::pick(r.prob, gold, 0)));
      state = r.state;
      prev = cfg_.teacher_forcing ? gold : argmax(r.prob.value());
    }
    nn::Var total = step_losses.size() == 1 ? step_losses[0] : nn::sum_all(nn::concat_rows(step_losses));
    return nn::scale(total, 1.0 / static_cast<double>(step_losses.size()));
  }

  DecodeResult decode(const CodeGraph& g, const Tokens& keywords, const Vocab& vocab) {
    return cfg_.beam_width <= 1 ? greedy(g, keywords, vocab) : beam(g, keywords, vocab, cfg_.beam_width);
  }

  // Ids the decoder may never emit: every reserved entry except EOS.
  static bool blocked(std::size_t id) noexcept {
    return id != Vocab::kEos && id < Vocab::kSpecialCount + kAstKindCount;
  }

  // Output distribution with blocked ids removed and the rest renormalized.
  static std::vector<double> emission_probs(const nn::Matrix& prob) {
    std::vector<double> p(prob.values().begin(), prob.values().end());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (blocked(i)) p[i] = 0.0;
      total += p[i];
    }
    if (total > 0.0)
      for (auto& v : p) v /= total;
    return p;
  }

  DecodeResult greedy(const CodeGraph& g, const Tokens& keywords, const Vocab& vocab) {
    nn::Tape t(false);
    Prepared p = prepare(t, g, keywords, vocab);
    DecoderState state = initial_state(t, p.enc.r_g);
    std::size_t prev = Vocab::kBos;
    DecodeResult out;
    for (std::size_t step = 0; step < cfg_.max_decode_length; ++step) {
      nn::Var input = embed(t, {input_id(prev)});
      StepResult r = decoder_step(t, state, input, p.mem);
      output_distribution(t, r, input, p.src);
      const auto probs = emission_probs(r.prob.value());
      const std::size_t best = argmax(probs);
      out.p_gen.push_back(r.p_gen.scalar());
      out.log_prob += std::log(std::max(probs[best], nn::kProbClamp));
      if (best == Vocab::kEos) break;
      out.tokens.push_back(p.src.surface(best, vocab));
      state = r.state;
      prev = best;
    }
    return out;
  }

  DecodeResult beam(const CodeGraph& g, const Tokens& keywords, const Vocab& vocab, std::size_t width) {
    nn::Tape t(false);
    Prepared p = prepare(t, g, keywords, vocab);
    struct Hyp {
      std::vector<std::size_t> ids;
      std::vector<double> p_gen;
      double log_prob = 0.0;
      DecoderState state;
      bool done = false;
    };
    std::vector<Hyp> live{Hyp{{}, {}, 0.0, initial_state(t, p.enc.r_g), false}};
    std::vector<Hyp> finished;
    for (std::size_t step = 0; step < cfg_.max_decode_length && !live.empty(); ++step) {
      std::vector<Hyp> expanded;
      for (const auto& h : live) {
        const std::size_t prev = h.ids.empty() ? Vocab::kBos : h.ids.back();
        nn::Var input = embed(t, {input_id(prev)});
        StepResult r = decoder_step(t, h.state, input, p.mem);
        output_distribution(t, r, input, p.src);
        const auto probs = emission_probs(r.prob.value());
        std::vector<std::size_t> order(probs.size());
        std::iota(order.begin(), order.end(), 0);
        const std::size_t keep = std::min(width, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                          [&](std::size_t a, std::size_t b) { return probs[a] > probs[b] || (probs[a] == probs[b] && a < b); });
        for (std::size_t k = 0; k < keep; ++k) {
          Hyp next = h;
          next.ids.push_back(order[k]);
          next.p_gen.push_back(r.p_gen.scalar());
          next.log_prob += std::log(std::max(probs[order[k]], nn::kProbClamp));
          next.state = r.state;
          next.done = order[k] == Vocab::kEos;
          expanded.push_back(std::move(next));
        }
      }
      std::stable_sort(expanded.begin(), expanded.end(),
                       [](const Hyp& a, const Hyp& b) { return a.log_prob > b.log_prob; });
      if (expanded.size() > width) expanded.resize(width);
      live.clear();
      for (auto& h : expanded) (h.done ? finished : live).push_back(std::move(h));
    }
    for (auto& h : live) finished.push_back(std::move(h));
    const auto best = std::max_element(finished.begin(), finished.end(), [](const Hyp& a, const Hyp& b) {
      return a.log_prob < b.log_prob;
    });
    DecodeResult out;
    out.log_prob = best->log_prob;
    out.p_gen = best->p_gen;
    for (auto id : best->ids)
      if (id != Vocab::kEos) out.tokens.push_back(p.src.surface(id, vocab));
    return out;
  }

  template <class Range>
  static std::size_t argmax(const Range& r) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < std::size(r); ++i)
      if (r[i] > r[best]) best = i;
    return best;
  }
  static std::size_t argmax(const nn::Matrix& m) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.size(); ++i)
      if (m[i] > m[best]) best = i;
    return best;
  }

 private:
  // e_u = tanh([s : h_u] W_a + b_a) W'_a, alpha = softmax(e).
  struct Attention {
    nn::ParamRef weight;  // 2d x d, rows [state ; memory]
    nn::ParamRef bias;    // 1 x d
    nn::ParamRef score;   // d x 1

    static Attention create(nn::ParamStore& ps, nn::Rng& rng, const std::string& name, std::size_t d) {
      Attention a;
      a.weight = ps.add(name + ".weight", 2 * d, d, nn::Init::Glorot, rng);
      a.bias = ps.add(name + ".bias", 1, d, nn::Init::Zeros, rng);
      a.score = ps.add(name + ".score", d, 1, nn::Init::Glorot, rng);
      return a;
    }

    nn::Var keys(nn::Tape& t, nn::ParamStore& ps, nn::Var memory, std::size_t d) const {
      return nn::add(nn::matmul(memory, nn::slice_rows(t.param(ps[weight]), d, d)), t.param(ps[bias]));
    }

    nn::Var weights(nn::Tape& t, nn::ParamStore& ps, nn::Var s, nn::Var keys, std::size_t d) const {
      nn::Var query = nn::matmul(s, nn::slice_rows(t.param(ps[weight]), 0, d));
      return nn::softmax(nn::matmul(nn::tanh(nn::add(keys, query)), t.param(ps[score])));
    }
  };

  GeneratorConfig cfg_;
  std::size_t vocab_size_ = 0;
  std::size_t d_ = 0;
  nn::ParamStore params_;
  Ggnn ggnn_;
  nn::ParamRef keyword_embedding_;
  nn::LstmCell kw_forward_, kw_backward_;
  nn::ParamRef kw_proj_;
  nn::ParamRef key_gate_node_, key_gate_state_;
  nn::ParamRef graph_gate_keyword_, graph_gate_state_;
  nn::ParamRef init_;
  nn::LstmCell decoder_;
  Attention node_att_, keyword_att_;
  nn::ParamRef context_;
  nn::Linear out_hidden_, out_vocab_;
  nn::ParamRef switch_state_, switch_context_, switch_input_, switch_bias_;
};

struct GeneratorExample {
  const CodeGraph* graph = nullptr;
  Tokens keywords;
};

inline std::vector<GeneratorExample> pair_keywords(const std::vector<CodeGraph>& graphs,
                                                   const std::vector<KeywordSet>& keywords) {
  if (graphs.size() != keywords.size()) throw DataError("keyword sets and graphs differ in number");
  std::vector<GeneratorExample> out;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i].id != keywords[i].id)
      throw DataError("keywords for '" + keywords[i].id + "' paired with graph '" + graphs[i].id + "'");
    out.push_back(GeneratorExample{&graphs[i], keywords[i].words});
  }
  return out;
}

inline std::vector<Prediction> predict_names(GeneratorModel& model, const std::vector<GeneratorExample>& examples,
                                             const Vocab& vocab, std::vector<DecodeResult>* details = nullptr) {
  std::vector<Prediction> out;
  for (const auto& ex : examples) {
    auto r = model.decode(*ex.graph, ex.keywords, vocab);
    out.push_back(Prediction{ex.graph->id, r.tokens});
    if (details) details->push_back(std::move(r));
  }
  return out;
}

inline CorpusReport evaluate_generator(GeneratorModel& model, const std::vector<GeneratorExample>& examples,
                                       const Vocab& vocab) {
  std::vector<CodeGraph> refs;
  refs.reserve(examples.size());
  for (const auto& ex : examples) refs.push_back(*ex.graph);
  return evaluate_corpus(predict_names(model, examples, vocab), refs);
}

// End-to-end training on (graph, keywords) pairs with early stopping on the
// validation ROUGE-1 F1 of greedy decodes.
inline TrainLog train_generator(GeneratorModel& model, const std::vector<GeneratorExample>& train,
                                const std::vector<GeneratorExample>& valid, const Vocab& vocab,
                                const TrainOptions& opt) {
  auto batch_step = [&](const std::vector<std::size_t>& batch) {
    double total = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto i : batch) {
      nn::Tape t;
      auto l = model.loss(t, *train[i].graph, train[i].keywords, vocab);
      total += l.scalar();
      t.backward(nn::scale(l, scale));
    }
    return total * scale;
  };
  std::function<std::optional<double>()> validate;
  if (!valid.empty())
    validate = [&]() -> std::optional<double> {
      const std::size_t beam = model.config().beam_width;
      model.config().beam_width = 1;
      const double r1 = evaluate_generator(model, valid, vocab).overall.mean().r1.f1;
      model.config().beam_width = beam;
      return r1;
    };
  return fit(model.params(), train.size(), batch_step, validate, opt);
}

}  // namespace kgmn
