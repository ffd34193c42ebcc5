#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "cells.hpp"
#include "codegraph.hpp"
#include "params.hpp"
#include "vocab.hpp"

namespace kgmn {

struct GgnnConfig {
  std::size_t hidden = 256;
  std::size_t timesteps = 4;
  std::size_t edge_types = kEdgeTypeCount;
  bool tie_timesteps = false;  // one f_k shared by all steps
};

struct EncodedGraph {
  nn::Var h;    // |V| x d node representations after T steps
  nn::Var x;    // |V| x d node embeddings
  nn::Var r_g;  // 1 x d graph state
};

// Gated graph network over a CodeGraph: typed-edge linear messages summed at
// the receiver, GRU update, gated sum readout.
class Ggnn {
 public:
  Ggnn() = default;

  Ggnn(nn::ParamStore& ps, nn::Rng& rng, const GgnnConfig& cfg, std::size_t vocab_size) : cfg_(cfg) {
    if (cfg.hidden == 0) throw std::invalid_argument("ggnn hidden size must be positive");
    if (cfg.edge_types == 0 || cfg.edge_types > kEdgeTypeCount)
      throw std::invalid_argument("ggnn edge type count out of range");
    const std::size_t d = cfg.hidden;
    embedding_ = ps.add("embedding", vocab_size, d, nn::Init::Embedding, rng);
    const std::size_t maps = cfg.tie_timesteps ? 1 : cfg.timesteps;
    edge_maps_.resize(maps);
    for (std::size_t t = 0; t < maps; ++t)
      for (std::size_t k = 0; k < cfg.edge_types; ++k) {
        std::string name = "ggnn.edge." + std::string(edge_type_name(static_cast<EdgeType>(k)));
        if (!cfg.tie_timesteps) name += ".t" + std::to_string(t);
        edge_maps_[t].push_back(nn::Linear::create(ps, rng, name, d, d));
      }
    gru_ = nn::GruCell::create(ps, rng, "ggnn.gru", d, d);
    readout_gate_ = ps.add("ggnn.readout.gate", 2 * d, 1, nn::Init::Glorot, rng);
    readout_proj_ = ps.add("ggnn.readout.proj", d, d, nn::Init::Glorot, rng);
  }

  const GgnnConfig& config() const noexcept { return cfg_; }
  nn::ParamRef embedding() const noexcept { return embedding_; }
  const nn::Linear& edge_map(std::size_t type, std::size_t step) const {
    return edge_maps_[cfg_.tie_timesteps ? 0 : step][type];
  }

  nn::Var embed_nodes(nn::Tape& t, nn::ParamStore& ps, const std::vector<std::size_t>& ids) const {
    return nn::gather_rows(t.param(ps[embedding_]), ids);
  }

  // One round: every edge (s -> u) of type k sends f_{k,t}(h_s) to u; each
  // node sums what it receives and feeds the sum to the GRU.
  nn::Var message_pass_step(nn::Tape& t, nn::ParamStore& ps, nn::Var h, const CodeGraph& g, std::size_t step) const {
    const std::size_t n = g.size();
    std::vector<nn::Var> messages;
    std::vector<std::size_t> receivers;
    for (std::size_t k = 0; k < cfg_.edge_types; ++k) {
      const auto& edges = g.edges[k];
      if (edges.empty()) continue;
      std::vector<std::size_t> senders;
      senders.reserve(edges.size());
      for (const auto& e : edges) {
        senders.push_back(e.src);
        receivers.push_back(e.dst);
      }
      messages.push_back(edge_map(k, step)(t, ps, nn::gather_rows(h, std::move(senders))));
    }
    nn::Var incoming = messages.empty()
                           ? t.constant(nn::Matrix(n, cfg_.hidden))
                           : nn::scatter_add_rows(messages.size() == 1 ? messages.front() : nn::concat_rows(messages),
                                                  std::move(receivers), n);
    return gru_(t, ps, incoming, h);
  }

  // r_g = sum_u sigmoid([h_u : x_u] W_i) * (h_u W_j); the gate is one scalar per node.
  nn::Var graph_readout(nn::Tape& t, nn::ParamStore& ps, nn::Var h, nn::Var x) const {
    nn::Var gate = nn::sigmoid(nn::matmul(nn::concat_cols(h, x), t.param(ps[readout_gate_])));
    nn::Var proj = nn::matmul(h, t.param(ps[readout_proj_]));
    return nn::sum_rows(nn::mul(proj, gate));
  }

  EncodedGraph encode(nn::Tape& t, nn::ParamStore& ps, const CodeGraph& g, const std::vector<std::size_t>& ids) const {
    if (ids.size() != g.size()) throw std::invalid_argument("one vocabulary id per node is required");
    nn::Var x = embed_nodes(t, ps, ids);
    nn::Var h = x;
    for (std::size_t step = 0; step < cfg_.timesteps; ++step) h = message_pass_step(t, ps, h, g, step);
    return EncodedGraph{h, x, graph_readout(t, ps, h, x)};
  }

  EncodedGraph encode(nn::Tape& t, nn::ParamStore& ps, const CodeGraph& g, const Vocab& vocab) const {
    return encode(t, ps, g, node_ids(g, vocab));
  }

 private:
  GgnnConfig cfg_;
  nn::ParamRef embedding_;
  std::vector<std::vector<nn::Linear>> edge_maps_;
  nn::GruCell gru_;
  nn::ParamRef readout_gate_;
  nn::ParamRef readout_proj_;
};

}  // namespace kgmn
