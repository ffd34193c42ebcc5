#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "kgmn/generator.hpp"
#include "kgmn/gradcheck.hpp"
#include "support.hpp"

using namespace kgmn;
using namespace kgmn::testing;
using Catch::Matchers::WithinAbs;

namespace {

GgnnConfig ggnn_cfg(std::size_t d = 6, std::size_t steps = 2) {
  GgnnConfig c;
  c.hidden = d;
  c.timesteps = steps;
  return c;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM step from a zero state.
std::vector<double> lstm_first_step(const nn::ParamStore& ps, const std::string& name, const nn::Matrix& x,
                                    std::size_t row) {
  const auto& w = ps.find(name + ".input_weight")->value;
  const auto& b = ps.find(name + ".bias")->value;
  const std::size_t h = b.cols() / 4;
  auto gate = [&](std::size_t c) {
    double s = b[c];
    for (std::size_t i = 0; i < x.cols(); ++i) s += x(row, i) * w(i, c);
    return s;
  };
  std::vector<double> out(h);
  for (std::size_t j = 0; j < h; ++j) {
    const double cell = sig(gate(j)) * std::tanh(gate(2 * h + j));
    out[j] = sig(gate(3 * h + j)) * std::tanh(cell);
  }
  return out;
}

double total(const nn::Matrix& m) { return std::accumulate(m.values().begin(), m.values().end(), 0.0); }

std::size_t expected_elements(std::size_t d, std::size_t v, std::size_t steps, const GeneratorConfig& c) {
  std::size_t n = v * d + 8 * steps * (d * d + d) + 6 * d * d + 6 * d + 2 * d + d * d;  // encoder
  if (!c.tie_keyword_embeddings) n += v * d;
  n += 2 * (3 * d * d + 2 * d) + 2 * d * d;  // keyword BiLSTM and projection
  if (c.use_key_gate) n += 2 * d * d;
  if (c.use_graph_gate) n += 2 * d * d;
  n += d * d + 8 * d * d + 4 * d;  // init and decoder LSTM
  n += (c.use_dual_attention ? 2 : 1) * (2 * d * d + 2 * d);
  n += (c.use_dual_attention ? 2 : 1) * d * d;
  n += 2 * d * d + d + d * v + v + 3 * d + 1;
  return n;
}

}  // namespace

TEST_CASE("generator rejects bad shapes", "[generator]") {
  CHECK_THROWS_AS(GeneratorModel(ggnn_cfg(5), {}, 20, 1), std::invalid_argument);
  GeneratorConfig c;
  c.beam_width = 0;
  CHECK_THROWS_AS(GeneratorModel(ggnn_cfg(), c, 20, 1), std::invalid_argument);
}

TEST_CASE("generator parameter count", "[generator]") {
  for (int mask = 0; mask < 16; ++mask) {
    GeneratorConfig c;
    c.use_key_gate = mask & 1;
    c.use_graph_gate = mask & 2;
    c.use_dual_attention = mask & 4;
    c.tie_keyword_embeddings = mask & 8;
    GeneratorModel m(ggnn_cfg(6, 3), c, 23, 1);
    INFO("mask " << mask);
    CHECK(m.params().element_count() == expected_elements(6, 23, 3, c));
    CHECK((m.params().find("gate.key.node") != nullptr) == c.use_key_gate);
    CHECK((m.params().find("gate.graph.keyword") != nullptr) == c.use_graph_gate);
    CHECK((m.params().find("attention.keyword.weight") != nullptr) == c.use_dual_attention);
    CHECK((m.params().find("keywords.embedding") != nullptr) == !c.tie_keyword_embeddings);
  }
}

TEST_CASE("copy source extends the vocabulary with body surfaces", "[generator]") {
  auto g = build_graph(MethodRecord{"m", "int getCount() { return zork + total + zork; }", {"get", "count"}, "p", "train"});
  Vocab vocab;
  vocab.add("total", 9);
  auto cs = make_copy_source(g, vocab);
  CHECK(cs.vocab_size == vocab.size());
  // punctuation is lexical too, so it joins the extension
  CHECK(std::count(cs.oov.begin(), cs.oov.end(), "zork") == 1);
  CHECK(std::count(cs.oov.begin(), cs.oov.end(), "total") == 0);
  CHECK(std::set<std::string>(cs.oov.begin(), cs.oov.end()).size() == cs.oov.size());
  CHECK(cs.ext_size() == vocab.size() + cs.oov.size());
  const auto zork = cs.ext_id("zork", vocab);
  REQUIRE(zork.has_value());
  CHECK(*zork >= vocab.size());
  CHECK(cs.surface(*zork, vocab) == "zork");
  CHECK(cs.ext_id("total", vocab) == vocab.id("total"));
  CHECK_FALSE(cs.ext_id("count", vocab).has_value());
  for (std::size_t k = 0; k < cs.lexical_nodes.size(); ++k) {
    const auto i = cs.lexical_nodes[k];
    CHECK_FALSE(g.is_masked(i));
    CHECK(cs.surface(cs.lexical_ext[k], vocab) == g.nodes[i].label);
  }

  GeneratorModel m(ggnn_cfg(), {}, vocab.size(), 1);
  std::size_t unscorable = 0;
  auto target = m.target_ids(g, cs, vocab, &unscorable);
  CHECK(unscorable == 2);
  CHECK(target == std::vector<std::size_t>{Vocab::kUnk, Vocab::kUnk, Vocab::kEos});
}

TEST_CASE("keyword encoder matches an LSTM oracle for one keyword", "[generator]") {
  const auto g = five_node_graph();
  const Vocab vocab = vocab_of({g});
  GeneratorModel m(ggnn_cfg(6), {}, vocab.size(), 2);
  nn::Tape t(false);
  const std::vector<std::size_t> ids = {vocab.id("user")};
  auto enc = m.encode_keywords(t, ids);
  const auto x = m.embed_keywords(t, ids).value();
  auto fwd = lstm_first_step(m.params(), "keywords.forward", x, 0);
  auto bwd = lstm_first_step(m.params(), "keywords.backward", x, 0);
  REQUIRE(enc.h.value().shape() == nn::Shape{1, 6});
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK_THAT(enc.h.value()(0, j), WithinAbs(fwd[j], 1e-14));
    CHECK_THAT(enc.h.value()(0, 3 + j), WithinAbs(bwd[j], 1e-14));
  }
  // r_k projects the first and last states, which coincide here
  const auto& proj = m.params().find("keywords.state_proj")->value;
  for (std::size_t j = 0; j < 6; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 6; ++i) s += enc.h.value()(0, i) * (proj(i, j) + proj(6 + i, j));
    CHECK_THAT(enc.r_k.value()(0, j), WithinAbs(s, 1e-14));
  }
  CHECK_THROWS_AS(m.encode_keywords(t, {}), std::invalid_argument);
}

TEST_CASE("keyword encoder directions are causal", "[generator]") {
  const auto g = five_node_graph();
  const Vocab vocab = vocab_of({g});
  GeneratorModel m(ggnn_cfg(6), {}, vocab.size(), 3);
  const auto a = vocab.id("user"), b = vocab.id("name"), c = vocab.id("get");
  nn::Tape t(false);
  auto ab = m.encode_keywords(t, {a, b}).h.value();
  auto ac = m.encode_keywords(t, {a, c}).h.value();
  auto cb = m.encode_keywords(t, {c, b}).h.value();
  auto ba = m.encode_keywords(t, {b, a}).h.value();
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(ab(0, j) == ac(0, j));          // forward state of the first keyword ignores what follows
    CHECK(ab(1, 3 + j) == cb(1, 3 + j));  // backward state of the last ignores what precedes
  }
  bool differs = false;
  for (std::size_t j = 0; j < 6; ++j) differs |= ab(0, j) != ba(1, j);
  CHECK(differs);
  // an empty keyword list is the sentinel
  CHECK(GeneratorModel::keyword_ids({}, vocab) == std::vector<std::size_t>{Vocab::kNoKeyword});
}

TEST_CASE("zero gate weights halve both memories", "[generator]") {
  const auto g = five_node_graph();
  const Vocab vocab = vocab_of({g});
  GeneratorModel m(ggnn_cfg(4), {}, vocab.size(), 4);
  for (auto name : {"gate.key.node", "gate.key.state", "gate.graph.keyword", "gate.graph.state"})
    m.params().find(name)->value.fill(0.0);
  nn::Tape t(false);
  auto p = m.prepare(t, g, {"user", "name"}, vocab);
  const auto& h = p.enc.h.value();
  const auto& hk = p.kenc.h.value();
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(p.gated.nodes.value()[i] == 0.5 * h[i]);
  for (std::size_t i = 0; i < hk.size(); ++i) CHECK(p.gated.keywords.value()[i] == 0.5 * hk[i]);
}

TEST_CASE("attention weights", "[generator]") {
  const Vocab vocab = vocab_of({five_node_graph()});
  GeneratorModel m(ggnn_cfg(4), {}, vocab.size(), 5);

  SECTION("a single node takes all the weight") {
    CodeGraph one;
    one.id = "one";
    one.nodes = {token("user")};
    one.labels = {0};
    nn::Tape t(false);
    auto p = m.prepare(t, one, {"user"}, vocab);
    auto r = m.decoder_step(t, m.initial_state(t, p.enc.r_g), m.embed(t, {Vocab::kBos}), p.mem);
    CHECK(r.node_attention.value()(0, 0) == 1.0);
  }
  SECTION("a zero score vector spreads weight evenly") {
    m.params().find("attention.node.score")->value.fill(0.0);
    const auto g = five_node_graph();
    nn::Tape t(false);
    auto p = m.prepare(t, g, {"user"}, vocab);
    auto r = m.decoder_step(t, m.initial_state(t, p.enc.r_g), m.embed(t, {Vocab::kBos}), p.mem);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK_THAT(r.node_attention.value()(i, 0), WithinAbs(0.2, 1e-15));
  }
}

TEST_CASE("output distribution mixes generation and copying", "[generator]") {
  const auto g = build_graph(MethodRecord{"m", "int getCount() { return zork + user + zork; }", {"get", "count"}, "p", "train"});
  const Vocab vocab = vocab_of({five_node_graph()});
  GeneratorModel m(ggnn_cfg(4), {}, vocab.size(), 6);
  nn::Tape t(false);
  auto p = m.prepare(t, g, {"user"}, vocab);
  REQUIRE_FALSE(p.src.oov.empty());
  const auto input = m.embed(t, {Vocab::kBos});
  auto step = [&](std::optional<double> force) {
    auto r = m.decoder_step(t, m.initial_state(t, p.enc.r_g), input, p.mem);
    m.output_distribution(t, r, input, p.src, force);
    return r;
  };

  auto gen = step(1.0);
  auto copy = step(0.0);
  auto mixed = step(std::nullopt);
  const std::size_t ext = p.src.ext_size();
  REQUIRE(gen.prob.value().shape() == nn::Shape{ext, 1});
  CHECK_THAT(total(gen.prob.value()), WithinAbs(1.0, 1e-12));
  CHECK_THAT(total(copy.prob.value()), WithinAbs(1.0, 1e-12));
  CHECK_THAT(total(mixed.prob.value()), WithinAbs(1.0, 1e-12));
  // generation never reaches out-of-vocabulary surfaces
  for (std::size_t i = vocab.size(); i < ext; ++i) CHECK(gen.prob.value()(i, 0) == 0.0);

  // copying follows node attention over unmasked lexical nodes
  const auto& alpha = copy.node_attention.value();
  std::vector<double> expect(ext, 0.0);
  double mass = 0.0;
  for (auto i : p.src.lexical_nodes) mass += alpha(i, 0);
  for (std::size_t k = 0; k < p.src.lexical_nodes.size(); ++k)
    expect[p.src.lexical_ext[k]] += alpha(p.src.lexical_nodes[k], 0) / mass;
  for (std::size_t i = 0; i < ext; ++i) CHECK_THAT(copy.prob.value()(i, 0), WithinAbs(expect[i], 1e-14));

  const double pg = mixed.p_gen.scalar();
  CHECK((pg > 0.0 && pg < 1.0));
  for (std::size_t i = 0; i < ext; ++i)
    CHECK_THAT(mixed.prob.value()(i, 0),
               WithinAbs(pg * gen.prob.value()(i, 0) + (1 - pg) * copy.prob.value()(i, 0), 1e-14));
}

TEST_CASE("a uniform generator costs ln |V| per step", "[generator]") {
  const auto g = five_node_graph();
  const Vocab vocab = vocab_of({g});
  GeneratorModel m(ggnn_cfg(4), {}, vocab.size(), 7);
  auto& ps = m.params();
  ps.find("output.vocab.weight")->value.fill(0.0);
  ps.find("output.vocab.bias")->value.fill(0.0);
  for (auto name : {"switch.state", "switch.context", "switch.input"}) ps.find(name)->value.fill(0.0);
  ps.find("switch.bias")->value.fill(60.0);  // p_gen rounds to exactly 1
  nn::Tape t(false);
  CHECK_THAT(m.loss(t, g, {"user", "name"}, vocab).scalar(),
             WithinAbs(std::log(static_cast<double>(vocab.size())), 1e-12));
}

TEST_CASE("generator gradients match finite differences", "[generator][gradcheck]") {
  const auto g = five_node_graph();
  const Vocab vocab = vocab_of({g});
  for (bool full : {true, false}) {
    GeneratorConfig c;
    c.use_key_gate = c.use_graph_gate = c.use_dual_attention = c.tie_keyword_embeddings = full;
    GeneratorModel m(ggnn_cfg(4, 1), c, vocab.size(), 8);
    nn::GradCheckOptions opt;
    opt.max_per_parameter = 40;
    opt.floor = 1e-4;  // central differences are only good to ~1e-11 absolute here
    auto res = nn::grad_check([&](nn::Tape& t) { return m.loss(t, g, {"user", "name"}, vocab); }, m.params(), opt);
    INFO((full ? "full: " : "ablated: ") << res.worst_parameter << " analytic " << res.analytic << " numeric "
                                         << res.numeric);
    CHECK(res.max_relative_error < 1e-5);
  }
}

TEST_CASE("every parameter receives gradient", "[generator]") {
  const auto train = select_split(toy_graphs(), "train");
  const Vocab vocab = build_vocab(train);
  const CodeGraph* rich = nullptr;
  for (const auto& g : train) {
    bool all = true;
    for (const auto& e : g.edges) all &= !e.empty();
    if (all) {
      rich = &g;
      break;
    }
  }
  REQUIRE(rich);
  GeneratorConfig c;
  c.tie_keyword_embeddings = false;
  GeneratorModel m(ggnn_cfg(6, 2), c, vocab.size(), 9);
  nn::Tape t;
  t.backward(m.loss(t, *rich, reference_keywords(*rich).words, vocab));
  for (const auto& p : m.params()) {
    INFO(p.name);
    CHECK(squared_norm(p.grad) > 0.0);
  }
}

TEST_CASE("generator memorizes a single example", "[generator][training]") {
  const auto g = five_node_graph();
  const Vocab vocab = vocab_of({g});
  GeneratorModel m(ggnn_cfg(8, 2), {}, vocab.size(), 10);
  nn::AdamConfig adam;
  adam.learning_rate = 0.01;
  double loss = 1e9;
  std::size_t steps = 0;
  for (; steps < 500 && loss >= 0.05; ++steps) {
    nn::Tape t;
    auto l = m.loss(t, g, {"user", "name"}, vocab);
    loss = l.scalar();
    t.backward(l);
    nn::adam_step(m.params(), adam);
  }
  INFO("steps " << steps);
  CHECK(loss < 0.05);
  CHECK(m.greedy(g, {"user", "name"}, vocab).tokens == g.name_subtokens);
}

TEST_CASE("decoding never emits reserved ids", "[generator][property]") {
  const auto& toy = toy_graphs();
  const Vocab vocab = build_vocab(select_split(toy, "train"));
  std::set<std::string> reserved;
  for (std::size_t i = 0; i < Vocab::kSpecialCount + kAstKindCount; ++i)
    if (i != Vocab::kEos) reserved.insert(vocab.surface(i));
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    GeneratorModel m(ggnn_cfg(8, 1), {}, vocab.size(), seed);
    for (std::size_t i = 0; i < 10; ++i) {
      const auto& g = toy[i * 13];
      auto r = m.greedy(g, {"user"}, vocab);
      CHECK(r.tokens.size() <= m.config().max_decode_length);
      CHECK(r.p_gen.size() >= r.tokens.size());
      for (const auto& w : r.tokens) CHECK(reserved.count(w) == 0);
    }
  }
  nn::Matrix probs(Vocab::kSpecialCount + kAstKindCount + 2, 1, 1.0);
  auto e = GeneratorModel::emission_probs(probs);
  CHECK_THAT(std::accumulate(e.begin(), e.end(), 0.0), WithinAbs(1.0, 1e-15));
  CHECK(e[Vocab::kEos] == e.back());
  CHECK(e[Vocab::kUnk] == 0.0);
  CHECK(e[Vocab::kSpecialCount] == 0.0);
}

TEST_CASE("beam search of width one is greedy decoding", "[generator]") {
  const auto& toy = toy_graphs();
  const Vocab vocab = build_vocab(select_split(toy, "train"));
  GeneratorModel m(ggnn_cfg(8, 1), {}, vocab.size(), 14);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& g = toy[i * 17];
    const auto kw = reference_keywords(g).words;
    auto a = m.greedy(g, kw, vocab);
    auto b = m.beam(g, kw, vocab, 1);
    CHECK(a.tokens == b.tokens);
    CHECK_THAT(a.log_prob, WithinAbs(b.log_prob, 1e-12));
    // wider beams respect the length cap too
    auto wide = m.beam(g, kw, vocab, 4);
    CHECK(wide.tokens.size() <= m.config().max_decode_length);
  }
}

TEST_CASE("keyword pairing checks ids", "[generator]") {
  const auto g = five_node_graph();
  KeywordSet ks{"five", KeywordSource::Reference, {"user"}, {1.0}};
  auto ex = pair_keywords({g}, {ks});
  CHECK(ex.front().keywords == Tokens{"user"});
  ks.id = "other";
  CHECK_THROWS_AS(pair_keywords({g}, {ks}), DataError);
  CHECK_THROWS_AS(pair_keywords({g}, {}), DataError);
}
