// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <unistd.h>

#include "../support.hpp"

using namespace kgmn;
using namespace kgmn::testing;

namespace {

// Pinned thresholds.
constexpr double kGradTolerance = 1e-3;
constexpr double kGradSeconds = 60.0;
constexpr std::size_t kDecodeSteps = 1000;
constexpr double kSumTolerance = 1e-9;
constexpr std::size_t kRougeMaxLength = 6;
constexpr std::size_t kOverfitMethods = 50;
constexpr std::size_t kOverfitEpochs = 30;
constexpr double kOverfitRouge1 = 0.95;
constexpr double kOverfitExact = 0.90;
constexpr double kOverfitSeconds = 15 * 60.0;
constexpr double kPlantedF1 = 0.95;
constexpr double kStrategyGap = 2.0;  // ROUGE-1 points
constexpr double kGuidanceGap = 3.0;  // ROUGE-1 points
constexpr double kEquivarianceTolerance = 1e-9;
constexpr std::size_t kRandomGraphs = 100;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1
Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const CodeGraph g = five_node_graph();
  const Vocab vocab = vocab_of({g});
  GgnnConfig gc;
  gc.hidden = 6;
  gc.timesteps = 2;

  ExtractorModel ex(gc, vocab.size(), 11);
  const auto ex_res = nn::grad_check(
      [&](nn::Tape& t) { return ex.loss(t, g, vocab, 1.5, ExtractorLossConfig{}); }, ex.params());

  GeneratorModel gen(gc, GeneratorConfig{}, vocab.size(), 12);
  const Tokens keywords = {"user", "name"};
  const auto gen_res = nn::grad_check([&](nn::Tape& t) { return gen.loss(t, g, keywords, vocab); }, gen.params());

  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = g.size() == 5 && ex_res.max_relative_error < kGradTolerance &&
           gen_res.max_relative_error < kGradTolerance && secs < kGradSeconds;
  o.detail = "extractor max rel err " + fmt(ex_res.max_relative_error, 8) + " over " +
             std::to_string(ex_res.checked) + " entries, generator " + fmt(gen_res.max_relative_error, 8) + " over " +
             std::to_string(gen_res.checked) + " (worst " + gen_res.worst_parameter + "), " + fmt(secs, 1) + "s";
  return o;
}

// ---------------------------------------------------------------- 2
Outcome distribution_invariants() {
  const auto& all = toy_graphs();
  const auto train = select_split(all, "train");
  const Vocab vocab = build_vocab(train);
  GgnnConfig gc;
  gc.hidden = 16;
  gc.timesteps = 2;
  GeneratorModel model(gc, GeneratorConfig{}, vocab.size(), 21);
  nn::Rng rng(22);

  double worst_sum = 0.0, worst_emission = 0.0, min_prob = 1.0;
  bool p_gen_ok = true;
  std::size_t steps = 0;
  for (std::size_t gi = 0; steps < kDecodeSteps; gi = (gi + 1) % all.size()) {
    const auto& g = all[gi];
    nn::Tape t(false);
    auto p = model.prepare(t, g, baseline_random(g, 4, rng).words, vocab);
    DecoderState state = model.initial_state(t, p.enc.r_g);
    for (std::size_t s = 0; s < 8 && steps < kDecodeSteps; ++s, ++steps) {
      nn::Var input = model.embed(t, {rng.below(vocab.size())});
      StepResult r = model.decoder_step(t, state, input, p.mem);
      model.output_distribution(t, r, input, p.src);
      double sum = 0.0;
      for (double v : r.prob.value().values()) {
        sum += v;
        min_prob = std::min(min_prob, v);
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      const auto e = GeneratorModel::emission_probs(r.prob.value());
      double esum = 0.0;
      for (double v : e) {
        esum += v;
        min_prob = std::min(min_prob, v);
      }
      worst_emission = std::max(worst_emission, std::abs(esum - 1.0));
      const double pg = r.p_gen.scalar();
      p_gen_ok = p_gen_ok && pg >= 0.0 && pg <= 1.0;
      state = r.state;
    }
  }

  // bounded activations on extreme inputs
  bool bounds_ok = true;
  double softmax_dev = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    nn::Tape t(false);
    nn::Matrix m(1, 1 + rng.below(20));
    for (auto& v : m.values()) v = rng.uniform(-800.0, 800.0);
    auto s = nn::softmax(t.constant(m)).value();
    auto sg = nn::sigmoid(t.constant(m)).value();
    double sum = 0.0;
    for (double v : s.values()) {
      sum += v;
      bounds_ok = bounds_ok && v >= 0.0 && v <= 1.0 && std::isfinite(v);
    }
    for (double v : sg.values()) bounds_ok = bounds_ok && v >= 0.0 && v <= 1.0 && std::isfinite(v);
    softmax_dev = std::max(softmax_dev, std::abs(sum - 1.0));
  }

  Outcome o;
  o.pass = steps == kDecodeSteps && worst_sum <= kSumTolerance && worst_emission <= kSumTolerance &&
           min_prob >= 0.0 && p_gen_ok && bounds_ok && softmax_dev <= kSumTolerance;
  o.detail = std::to_string(steps) + " steps, max |sum-1| " + fmt(worst_sum, 15) + " (after blocking " +
             fmt(worst_emission, 15) + "), min P " + fmt(min_prob, 6) + ", softmax/sigmoid bounds " +
             (bounds_ok ? "ok" : "violated");
  return o;
}

// ---------------------------------------------------------------- 3
void all_sequences(std::size_t max_len, std::vector<Tokens>& out) {
  out.push_back({});
  std::size_t begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i)
      for (const char* s : {"a", "b", "c"}) {
        Tokens t = out[i];
        t.push_back(s);
        out.push_back(std::move(t));
      }
    begin = end;
  }
}

// Every subsequence of `s`, encoded base 4 with a leading 1.
std::unordered_set<std::uint32_t> subsequences(const Tokens& s) {
  std::unordered_set<std::uint32_t> out;
  for (std::uint32_t mask = 0; mask < (1u << s.size()); ++mask) {
    std::uint32_t code = 1;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (mask & (1u << i)) code = code * 4 + static_cast<std::uint32_t>(s[i][0] - 'a' + 1);
    out.insert(code);
  }
  return out;
}

std::size_t code_length(std::uint32_t code) {
  std::size_t n = 0;
  for (; code > 1; code /= 4) ++n;
  return n;
}

Outcome rouge_oracle() {
  std::vector<Tokens> seqs;
  all_sequences(kRougeMaxLength, seqs);
  std::vector<std::unordered_set<std::uint32_t>> subs;
  for (const auto& s : seqs) subs.push_back(subsequences(s));

  std::size_t pairs = 0, mismatches = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t j = 0; j < seqs.size(); ++j) {
      const auto& small = subs[i].size() < subs[j].size() ? subs[i] : subs[j];
      const auto& large = subs[i].size() < subs[j].size() ? subs[j] : subs[i];
      std::size_t lcs = 0;
      for (auto c : small)
        if (large.count(c)) lcs = std::max(lcs, code_length(c));
      const double p = seqs[i].empty() ? 0.0 : static_cast<double>(lcs) / static_cast<double>(seqs[i].size());
      const double r = seqs[j].empty() ? 0.0 : static_cast<double>(lcs) / static_cast<double>(seqs[j].size());
      const double f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
      const auto got = rouge_l(seqs[i], seqs[j]);
      if (lcs_length(seqs[i], seqs[j]) != lcs || got.precision != p || got.recall != r || got.f1 != f) ++mismatches;
      ++pairs;
    }

  // hand-counted ROUGE-N
  struct Hand {
    Tokens cand, ref;
    std::size_t n;
    double p, r, f;
  };
  const std::vector<Hand> hand = {
      {{"get", "name"}, {"get", "user", "name"}, 1, 1.0, 2.0 / 3.0, 0.8},
      {{"get", "name"}, {"get", "user", "name"}, 2, 0.0, 0.0, 0.0},
      {{"a", "a", "b"}, {"a", "b"}, 1, 2.0 / 3.0, 1.0, 0.8},
      {{"a", "a", "b"}, {"a", "b"}, 2, 0.5, 1.0, 2.0 / 3.0},
      {{"a", "b", "a", "b"}, {"a", "b", "a"}, 2, 2.0 / 3.0, 1.0, 0.8},
      {{}, {"a"}, 1, 0.0, 0.0, 0.0},
  };
  std::size_t hand_bad = 0;
  for (const auto& h : hand) {
    const auto got = rouge_n(h.cand, h.ref, h.n);
    if (std::abs(got.precision - h.p) > 1e-15 || std::abs(got.recall - h.r) > 1e-15 ||
        std::abs(got.f1 - h.f) > 1e-15)
      ++hand_bad;
  }
  Outcome o;
  o.pass = mismatches == 0 && hand_bad == 0;
  o.detail = std::to_string(pairs) + " ROUGE-L pairs, " + std::to_string(mismatches) + " mismatches; " +
             std::to_string(hand.size()) + " ROUGE-N hand examples, " + std::to_string(hand_bad) + " wrong";
  return o;
}

// ---------------------------------------------------------------- 4
Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto train = select_split(toy_graphs(), "train");
  const Vocab vocab = build_vocab(train);
  const std::vector<CodeGraph> subset(train.begin(), train.begin() + kOverfitMethods);
  auto cfg = toy_config();
  cfg.batch_size = 4;
  cfg.learning_rate = 0.01;
  auto model = make_generator(cfg, vocab.size());
  const auto kw = reference_sets(subset);
  const auto examples = pair_keywords(subset, kw);
  auto opt = train_options(cfg, kOverfitEpochs, kGeneratorShuffle);
  opt.target_score = 1.0;
  opt.patience = kOverfitEpochs;
  const auto log = train_generator(model, examples, examples, vocab, opt);
  const auto rep = evaluate_generator(model, examples, vocab);
  const double r1 = rep.overall.mean().r1.f1, em = rep.overall.exact_match();
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = r1 >= kOverfitRouge1 && em >= kOverfitExact && log.epochs.size() <= kOverfitEpochs &&
           secs < kOverfitSeconds;
  o.detail = "ROUGE-1 " + fmt(r1) + ", exact " + fmt(em) + " after " + std::to_string(log.epochs.size()) +
             " epochs (best " + std::to_string(log.best_epoch) + "), " + fmt(secs, 1) + "s";
  return o;
}

// ---------------------------------------------------------------- 5, 6
std::vector<CodeGraph> planted_corpus(std::size_t n, std::uint64_t seed, const std::string& split) {
  const std::vector<std::string> plain = {"item", "value", "buffer", "node", "index", "cache",
                                          "state", "entry", "record", "queue", "table", "handle"};
  const std::vector<std::string> planted = {"alpha", "beta", "gamma"};
  nn::Rng rng(seed);
  auto word = [&] { return rng.below(4) == 0 ? planted[rng.below(3)] : plain[rng.below(plain.size())]; };
  std::vector<CodeGraph> out;
  for (std::size_t m = 0; m < n; ++m) {
    std::vector<std::string> used;
    std::string body;
    const std::size_t stmts = 2 + rng.below(3);
    for (std::size_t s = 0; s < stmts; ++s) {
      const auto a = word(), b = word(), c = word();
      for (const auto& w : {a, b, c}) used.push_back(w);
      body += rng.below(2) ? a + " = " + b + "(" + c + "); " : a + "." + b + "(" + c + "); ";
    }
    Tokens name = {"compute"};
    for (const auto& w : distinct_in_order(used))
      if (std::find(planted.begin(), planted.end(), w) != planted.end()) name.push_back(w);
    std::string declared = "compute";
    for (std::size_t i = 1; i < name.size(); ++i) declared += char(std::toupper(name[i][0])) + name[i].substr(1);
    MethodRecord rec{split + std::to_string(m), "void " + declared + "() { " + body + "}", name, "planted", split};
    out.push_back(build_graph(rec));
  }
  return out;
}

struct StrategyScores {
  std::map<std::string, double> r1;  // points
};

std::map<std::uint64_t, StrategyScores>& strategy_cache() {
  static std::map<std::uint64_t, StrategyScores> cache;
  return cache;
}

const StrategyScores& strategy_scores(std::uint64_t seed) {
  auto& cache = strategy_cache();
  if (auto it = cache.find(seed); it != cache.end()) return it->second;
  auto cfg = toy_config();
  cfg.seed = seed;
  const auto& all = toy_graphs();
  const auto train = select_split(all, "train"), valid = select_split(all, "valid"), test = select_split(all, "test");
  const Vocab vocab = build_vocab(train, cfg.min_count);
  auto ex = make_extractor(cfg, vocab.size());
  train_extractor(ex, train, valid, vocab, extractor_loss_config(cfg),
                  train_options(cfg, cfg.extractor_epochs, kExtractorShuffle));
  StrategyScores s;
  for (auto src : {KeywordSource::Extractor, KeywordSource::Random, KeywordSource::TextRank, KeywordSource::TfIdf,
                   KeywordSource::Reference}) {
    const auto sets = compute_keywords(src, test, cfg.keywords_k, random_keyword_seed(cfg, 2), &train, &ex, &vocab);
    s.r1[std::string(keyword_source_name(src))] = 100.0 * keyword_quality(sets, test).mean().r1.f1;
  }
  return cache[seed] = s;
}

Outcome extractor_competence() {
  const auto train = planted_corpus(150, 51, "train");
  const auto valid = planted_corpus(30, 52, "valid");
  const auto test = planted_corpus(60, 53, "test");
  const Vocab vocab = build_vocab(train, 1);
  GgnnConfig gc;
  gc.hidden = 16;
  gc.timesteps = 2;
  ExtractorModel model(gc, vocab.size(), 54);
  TrainOptions opt;
  opt.epochs = 20;
  opt.batch_size = 8;
  opt.adam.learning_rate = 0.01;
  opt.seed = 55;
  opt.target_score = 0.999;
  train_extractor(model, train, valid, vocab, ExtractorLossConfig{}, opt);
  const auto f1 = node_f1(model, test, vocab);

  const auto& toy = strategy_scores(1);
  const double ext = toy.r1.at("extractor"), rnd = toy.r1.at("random");
  Outcome o;
  o.pass = f1.f1 >= kPlantedF1 && ext > rnd;
  o.detail = "planted node F1 " + fmt(f1.f1) + " (P " + fmt(f1.precision) + ", R " + fmt(f1.recall) +
             "); toy keyword ROUGE-1 extractor " + fmt(ext, 2) + " vs random " + fmt(rnd, 2);
  return o;
}

Outcome strategy_ordering() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto& s = strategy_scores(seed).r1;
    const double ref = s.at("reference"), ext = s.at("extractor"), rnd = s.at("random");
    const double mid = std::max(s.at("tfidf"), s.at("textrank"));
    const bool ok = ref - ext >= kStrategyGap && ext - mid >= kStrategyGap && mid - rnd >= kStrategyGap;
    pass = pass && ok;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + ": ref " + fmt(ref, 2) +
              " ext " + fmt(ext, 2) + " tfidf " + fmt(s.at("tfidf"), 2) + " textrank " + fmt(s.at("textrank"), 2) +
              " random " + fmt(rnd, 2) + (ok ? "" : " [violated]");
  }
  return Outcome{pass, detail};
}

// ---------------------------------------------------------------- 7
Outcome guidance_effect() {
  auto cfg = toy_config();
  const auto& all = toy_graphs();
  const auto train = select_split(all, "train"), valid = select_split(all, "valid"), test = select_split(all, "test");
  const Vocab vocab = build_vocab(train, cfg.min_count);
  const auto train_kw = reference_sets(train), valid_kw = reference_sets(valid);
  auto model = make_generator(cfg, vocab.size());
  train_generator(model, pair_keywords(train, train_kw), pair_keywords(valid, valid_kw), vocab,
                  train_options(cfg, cfg.generator_epochs, kGeneratorShuffle));
  const auto ref_kw = reference_sets(test);
  const auto rnd_kw = compute_keywords(KeywordSource::Random, test, cfg.keywords_k, random_keyword_seed(cfg, 2));
  const double with_ref = 100.0 * evaluate_generator(model, pair_keywords(test, ref_kw), vocab).overall.mean().r1.f1;
  const double with_rnd = 100.0 * evaluate_generator(model, pair_keywords(test, rnd_kw), vocab).overall.mean().r1.f1;
  Outcome o;
  o.pass = with_ref >= with_rnd + kGuidanceGap;
  o.detail = "held-out ROUGE-1 with reference keywords " + fmt(with_ref, 2) + ", with random keywords " +
             fmt(with_rnd, 2);
  return o;
}

// ---------------------------------------------------------------- 8
bool bitwise_equal(const nn::Matrix& a, const nn::Matrix& b) {
  return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

Outcome ablations() {
  const auto& all = toy_graphs();
  const auto train = select_split(all, "train");
  const Vocab vocab = build_vocab(train);
  GgnnConfig gc;
  gc.hidden = 16;
  gc.timesteps = 2;
  const std::size_t d = gc.hidden;

  // KeyGate off: h' is h
  GeneratorConfig no_key;
  no_key.use_key_gate = false;
  GeneratorModel m1(gc, no_key, vocab.size(), 81);
  GeneratorModel m1_on(gc, GeneratorConfig{}, vocab.size(), 81);
  bool identity = true, gate_active = false;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& g = all[i];
    const auto kw = reference_keywords(g).words;
    nn::Tape t(false);
    auto p = m1.prepare(t, g, kw, vocab);
    identity = identity && bitwise_equal(p.gated.nodes.value(), p.enc.h.value());
    nn::Tape t2(false);
    auto q = m1_on.prepare(t2, g, kw, vocab);
    gate_active = gate_active || !bitwise_equal(q.gated.nodes.value(), q.enc.h.value());
  }

  // Dual attention off: outputs ignore the keyword states
  auto step_output = [&](GeneratorModel& m, const CodeGraph& g, const Tokens& kw, double noise) {
    nn::Tape t(false);
    auto p = m.prepare(t, g, kw, vocab);
    nn::Matrix perturbed = p.gated.keywords.value();
    nn::Rng rng(83);
    for (auto& v : perturbed.values()) v += noise * rng.uniform(-1.0, 1.0);
    p.gated.keywords = t.constant(perturbed);
    p.mem = m.attention_memory(t, p.gated);
    DecoderState state = m.initial_state(t, p.enc.r_g);
    std::vector<double> out;
    std::size_t prev = Vocab::kBos;
    for (std::size_t s = 0; s < 3; ++s) {
      nn::Var input = m.embed(t, {prev});
      StepResult r = m.decoder_step(t, state, input, p.mem);
      m.output_distribution(t, r, input, p.src);
      out.insert(out.end(), r.prob.value().values().begin(), r.prob.value().values().end());
      state = r.state;
      prev = GeneratorModel::argmax(r.prob.value()) < vocab.size() ? GeneratorModel::argmax(r.prob.value())
                                                                    : Vocab::kUnk;
    }
    return out;
  };
  GeneratorConfig no_dual;
  no_dual.use_dual_attention = false;
  GeneratorModel m2(gc, no_dual, vocab.size(), 82);
  GeneratorModel m2_on(gc, GeneratorConfig{}, vocab.size(), 82);
  bool invariant = true, sensitive = false;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& g = all[i];
    const auto kw = reference_keywords(g).words;
    invariant = invariant && step_output(m2, g, kw, 0.0) == step_output(m2, g, kw, 0.5);
    sensitive = sensitive || step_output(m2_on, g, kw, 0.0) != step_output(m2_on, g, kw, 0.5);
  }

  // parameter audit
  auto count = [&](GeneratorConfig c) { return GeneratorModel(gc, c, vocab.size(), 84).params().element_count(); };
  GeneratorConfig none;
  none.use_key_gate = none.use_graph_gate = none.use_dual_attention = false;
  GeneratorConfig no_graph = GeneratorConfig{};
  no_graph.use_graph_gate = false;
  const std::size_t full = count(GeneratorConfig{});
  const std::size_t gates = 2 * d * d;                         // W_g, U_g or W_k, U_k
  const std::size_t keyword_attention = 2 * d * d + d + d;     // W_a, b_a, w'_a
  const std::size_t context_block = d * d;                    // keyword half of U_c
  const bool audit = full - count(none) == 2 * gates + keyword_attention + context_block &&
                     full - count(no_key) == gates && full - count(no_graph) == gates &&
                     full - count(no_dual) == keyword_attention + context_block;

  Outcome o;
  o.pass = identity && gate_active && invariant && sensitive && audit;
  o.detail = std::string("KeyGate off h'==h ") + (identity ? "bitwise" : "DIFFERS") + " (on: " +
             (gate_active ? "changes h" : "no effect") + "); dual attention off " +
             (invariant ? "invariant" : "SENSITIVE") + " to keyword states (on: " +
             (sensitive ? "sensitive" : "invariant") + "); audit " + std::to_string(full) + " - " +
             std::to_string(count(none)) + " = " + std::to_string(full - count(none)) + " expected " +
             std::to_string(2 * gates + keyword_attention + context_block);
  return o;
}

// ---------------------------------------------------------------- 9
Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("kgmn-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> reports;
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    const std::string cmd = std::string("\"") + KGMN_CLI_PATH + "\" run-all --config \"" +
                            source_path("configs/toy.json") + "\" --data \"" +
                            source_path("data/toy_corpus.jsonl") + "\" --work-dir \"" + (dir / "work").string() +
                            "\" > \"" + (dir / "log.txt").string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return Outcome{false, "run-all failed; see " + (dir / "log.txt").string()};
    std::ifstream in(dir / "work" / "report.json", std::ios::binary);
    reports.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  if (same) fs::remove_all(root);
  return Outcome{same, "two run-all reports of " + std::to_string(reports[0].size()) + " bytes are " +
                           (same ? "byte-identical" : "DIFFERENT (kept in " + root.string() + ")")};
}

// ---------------------------------------------------------------- 10
Outcome ggnn_properties() {
  nn::Rng rng(101);
  const std::size_t vocab_size = 30;
  GgnnConfig zero;
  zero.hidden = 8;
  zero.timesteps = 0;
  nn::ParamStore ps0;
  nn::Rng init0(102);
  Ggnn g0(ps0, init0, zero, vocab_size);

  GgnnConfig cfg;
  cfg.hidden = 8;
  cfg.timesteps = 3;
  nn::ParamStore ps;
  nn::Rng init(103);
  Ggnn net(ps, init, cfg, vocab_size);

  bool identity = true;
  double worst_h = 0.0, worst_r = 0.0;
  for (std::size_t trial = 0; trial < kRandomGraphs; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const CodeGraph g = random_graph(rng, n);
    std::vector<std::size_t> ids(n);
    for (auto& id : ids) id = rng.below(vocab_size);

    nn::Tape t0(false);
    auto e0 = g0.encode(t0, ps0, g, ids);
    identity = identity && bitwise_equal(e0.h.value(), e0.x.value());

    const auto perm = random_permutation(rng, n);
    const CodeGraph pg = permute_graph(g, perm);
    std::vector<std::size_t> pids(n);
    for (std::size_t i = 0; i < n; ++i) pids[perm[i]] = ids[i];
    nn::Tape t(false);
    auto a = net.encode(t, ps, g, ids);
    auto b = net.encode(t, ps, pg, pids);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < cfg.hidden; ++c)
        worst_h = std::max(worst_h, std::abs(a.h.value()(i, c) - b.h.value()(perm[i], c)));
    for (std::size_t c = 0; c < cfg.hidden; ++c)
      worst_r = std::max(worst_r, std::abs(a.r_g.value()(0, c) - b.r_g.value()(0, c)));
  }
  Outcome o;
  o.pass = identity && worst_h <= kEquivarianceTolerance && worst_r <= kEquivarianceTolerance;
  o.detail = std::string("T=0 identity ") + (identity ? "holds" : "BROKEN") + "; over " +
             std::to_string(kRandomGraphs) + " graphs max node deviation " + fmt(worst_h, 15) + ", readout " +
             fmt(worst_r, 15);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"distribution invariants", distribution_invariants},
      {"ROUGE oracle equivalence", rouge_oracle},
      {"overfit 50 toy methods", overfit},
      {"extractor competence", extractor_competence},
      {"keyword strategy ordering", strategy_ordering},
      {"keyword guidance effect", guidance_effect},
      {"ablation contracts", ablations},
      {"run-all determinism", determinism},
      {"GGNN identity and permutation symmetry", ggnn_properties},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::atoi(argv[i])));

  std::size_t failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("exception: ") + e.what()};
    }
    ++ran;
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << (i + 1) << "] " << criteria[i].first << ": " << o.detail
              << " (" << fmt(seconds_since(t0), 1) << "s)" << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
