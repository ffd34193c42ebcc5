#pragma once

#include <cstddef>
#include <string>
#include <utility>

#include "autodiff.hpp"
#include "params.hpp"

namespace kgmn::nn {

// y = x W + b with W (in x out) and b (1 x out).
struct Linear {
  ParamRef weight;
  ParamRef bias;  // may be invalid for a bias-free map

  static Linear create(ParamStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
                       bool with_bias = true) {
    Linear l;
    l.weight = ps.add(name + ".weight", in, out, Init::Glorot, rng);
    if (with_bias) l.bias = ps.add(name + ".bias", 1, out, Init::Zeros, rng);
    return l;
  }

  Var operator()(Tape& t, ParamStore& ps, Var x) const {
    Var y = matmul(x, t.param(ps[weight]));
    return bias.valid() ? add(y, t.param(ps[bias])) : y;
  }
};

// Gated recurrent unit over a batch of rows:
//   r = s(x Wr + h Ur + b_r),  z = s(x Wz + h Uz + b_z)
//   n = tanh(x Wn + b_in + r * (h Un + b_hn))
//   h' = (1 - z) * n + z * h
// so an update gate of zero yields the candidate state.
struct GruCell {
  ParamRef input_weight;  // in x 3h, blocks [reset | update | candidate]
  ParamRef state_weight;  // h x 3h
  ParamRef input_bias;    // 1 x 3h
  ParamRef state_bias;    // 1 x 3h
  std::size_t hidden = 0;

  static GruCell create(ParamStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t hidden) {
    GruCell c;
    c.hidden = hidden;
    c.input_weight = ps.add(name + ".input_weight", in, 3 * hidden, Init::Glorot, rng);
    c.state_weight = ps.add(name + ".state_weight", hidden, 3 * hidden, Init::Glorot, rng);
    c.input_bias = ps.add(name + ".input_bias", 1, 3 * hidden, Init::Zeros, rng);
    c.state_bias = ps.add(name + ".state_bias", 1, 3 * hidden, Init::Zeros, rng);
    return c;
  }

  Var operator()(Tape& t, ParamStore& ps, Var x, Var h) const {
    if (h.shape().cols != hidden || x.shape().rows != h.shape().rows)
      throw ShapeError("gru: input " + x.shape().str() + " with state " + h.shape().str());
    Var gi = add(matmul(x, t.param(ps[input_weight])), t.param(ps[input_bias]));
    Var gh = add(matmul(h, t.param(ps[state_weight])), t.param(ps[state_bias]));
    Var r = sigmoid(add(slice_cols(gi, 0, hidden), slice_cols(gh, 0, hidden)));
    Var z = sigmoid(add(slice_cols(gi, hidden, hidden), slice_cols(gh, hidden, hidden)));
    Var n = tanh(add(slice_cols(gi, 2 * hidden, hidden), mul(r, slice_cols(gh, 2 * hidden, hidden))));
    return add(mul(one_minus(z), n), mul(z, h));
  }
};

// Standard LSTM, gate blocks [input | forget | cell | output]:
//   c' = s(f) * c + s(i) * tanh(g),  h' = s(o) * tanh(c')
struct LstmCell {
  ParamRef input_weight;  // in x 4h
  ParamRef state_weight;  // h x 4h
  ParamRef bias;          // 1 x 4h
  std::size_t hidden = 0;

  static LstmCell create(ParamStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t hidden) {
    LstmCell c;
    c.hidden = hidden;
    c.input_weight = ps.add(name + ".input_weight", in, 4 * hidden, Init::Glorot, rng);
    c.state_weight = ps.add(name + ".state_weight", hidden, 4 * hidden, Init::Glorot, rng);
    c.bias = ps.add(name + ".bias", 1, 4 * hidden, Init::Zeros, rng);
    return c;
  }

  std::pair<Var, Var> operator()(Tape& t, ParamStore& ps, Var x, Var h, Var c) const {
    if (h.shape().cols != hidden || c.shape() != h.shape() || x.shape().rows != h.shape().rows)
      throw ShapeError("lstm: input " + x.shape().str() + " with state " + h.shape().str() + " and cell " +
                       c.shape().str());
    Var gates = add(add(matmul(x, t.param(ps[input_weight])), matmul(h, t.param(ps[state_weight]))),
                    t.param(ps[bias]));
    Var i = sigmoid(slice_cols(gates, 0, hidden));
    Var f = sigmoid(slice_cols(gates, hidden, hidden));
    Var g = tanh(slice_cols(gates, 2 * hidden, hidden));
    Var o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    Var c_next = add(mul(f, c), mul(i, g));
    Var h_next = mul(o, tanh(c_next));
    return {h_next, c_next};
  }
};

}  // namespace kgmn::nn
