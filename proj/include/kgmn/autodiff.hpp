#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "params.hpp"
#include "tensor.hpp"

namespace kgmn::nn {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Shape shape() const { return value().shape(); }
  double scalar() const { return value()[0]; }
};

// Reverse-mode tape. Nodes are appended in evaluation order and replayed
// backwards. Parameter leaves read the parameter in place and accumulate
// their gradient straight into Parameter::grad.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, {}, false});
    return Var{this, nodes_.size() - 1};
  }

  Var param(Parameter& p) {
    nodes_.push_back(Node{{}, {}, &p.value, &p.grad, {}, grad_enabled_});
    return Var{this, nodes_.size() - 1};
  }

  Var record(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
  }

  Var record(Matrix value, std::span<const Var> inputs, Backward fn) {
    bool needs = false;
    if (grad_enabled_)
      for (const auto& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, needs ? std::move(fn) : Backward{}, needs});
    return Var{this, nodes_.size() - 1};
  }

  const Matrix& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  Matrix& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.sink) return *n.sink;
    if (n.grad.empty() && !value(id).empty()) n.grad = Matrix(value(id).rows(), value(id).cols());
    return n.grad;
  }

  void backward(Var loss) {
    if (value(loss.id).size() != 1)
      throw ShapeError("backward needs a scalar, got " + value(loss.id).shape().str());
    if (!nodes_[loss.id].needs_grad) return;
    grad(loss.id)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.back || n.grad.empty()) continue;
      n.back(*this, i);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const Matrix* ref;
    Matrix* sink;
    Backward back;
    bool needs_grad;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

namespace detail {

enum class Bcast { Same, Row, Col, Scalar };

// How `small` broadcasts against `big`; nullopt-like failure via flag.
inline bool broadcast_kind(Shape big, Shape small, Bcast& out) {
  if (big == small) {
    out = Bcast::Same;
  } else if (small.rows == 1 && small.cols == 1) {
    out = Bcast::Scalar;
  } else if (small.rows == 1 && small.cols == big.cols) {
    out = Bcast::Row;
  } else if (small.cols == 1 && small.rows == big.rows) {
    out = Bcast::Col;
  } else {
    return false;
  }
  return true;
}

inline std::size_t bcast_index(Bcast k, std::size_t i, std::size_t j, std::size_t cols) {
  switch (k) {
    case Bcast::Same: return i * cols + j;
    case Bcast::Row: return j;
    case Bcast::Col: return i;
    case Bcast::Scalar: return 0;
  }
  return 0;
}

inline void same_tape(const Var& a, const Var& b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands live on different tapes");
}

// Orders (a, b) so that b broadcasts against a.
inline Bcast orient(Var& a, Var& b, const char* op) {
  same_tape(a, b);
  Bcast k;
  if (broadcast_kind(a.shape(), b.shape(), k)) return k;
  if (broadcast_kind(b.shape(), a.shape(), k)) {
    std::swap(a, b);
    return k;
  }
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape().str() + " and " + b.shape().str());
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::same_tape(a, b);
  Tape& t = *a.tape;
  return t.record(matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) gemm_nt_acc(g, t.value(b.id), t.grad(a.id));
    if (t.needs_grad(b.id)) gemm_tn_acc(t.value(a.id), g, t.grad(b.id));
  });
}

inline Var add(Var a, Var b) {
  const auto k = detail::orient(a, b, "add");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out = av;
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) += bv[detail::bcast_index(k, i, j, cols)];
  return a.tape->record(std::move(out), {a, b}, [a, b, k](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id) += g;
    if (t.needs_grad(b.id)) {
      Matrix& gb = t.grad(b.id);
      const std::size_t cols = g.cols();
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < cols; ++j) gb[detail::bcast_index(k, i, j, cols)] += g(i, j);
    }
  });
}

inline Var mul(Var a, Var b) {
  const auto k = detail::orient(a, b, "mul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = av(i, j) * bv[detail::bcast_index(k, i, j, cols)];
  return a.tape->record(std::move(out), {a, b}, [a, b, k](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(a.id);
    const Matrix& bv = t.value(b.id);
    const std::size_t cols = g.cols();
    if (t.needs_grad(a.id)) {
      Matrix& ga = t.grad(a.id);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < cols; ++j) ga(i, j) += g(i, j) * bv[detail::bcast_index(k, i, j, cols)];
    }
    if (t.needs_grad(b.id)) {
      Matrix& gb = t.grad(b.id);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < cols; ++j) gb[detail::bcast_index(k, i, j, cols)] += g(i, j) * av(i, j);
    }
  });
}

inline Var scale(Var a, double s) {
  Matrix out = a.value();
  out *= s;
  return a.tape->record(std::move(out), {a}, [a, s](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

inline Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

// 1 - a
inline Var one_minus(Var a) {
  Matrix out = a.value();
  for (auto& v : out.values()) v = 1.0 - v;
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
  });
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  Matrix out = a.value();
  for (auto& v : out.values()) v = sigmoid(v);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

inline Var tanh(Var a) {
  Matrix out = a.value();
  for (auto& v : out.values()) v = std::tanh(v);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var log(Var a) {
  Matrix out = a.value();
  for (auto& v : out.values()) {
    if (!(v > 0.0)) throw std::domain_error("log of non-positive value");
    v = std::log(v);
  }
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(a.id);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
  });
}

inline Var reciprocal(Var a) {
  Matrix out = a.value();
  for (auto& v : out.values()) v = 1.0 / v;
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i] * y[i] * y[i];
  });
}

// Softmax over every element of a (row or column vector alike).
inline Var softmax(Var a) {
  Matrix out = a.value();
  if (out.empty()) throw ShapeError("softmax of an empty tensor");
  const double mx = *std::max_element(out.values().begin(), out.values().end());
  double z = 0.0;
  for (auto& v : out.values()) z += (v = std::exp(v - mx));
  for (auto& v : out.values()) v /= z;
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - dot);
  });
}

inline Var transpose(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.cols(), av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(j, i);
  });
}

// [a : b] along columns.
inline Var concat_cols(Var a, Var b) {
  detail::same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows())
    throw ShapeError("concat_cols: row mismatch " + av.shape().str() + " and " + bv.shape().str());
  const std::size_t ca = av.cols(), cb = bv.cols();
  Matrix out(av.rows(), ca + cb);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    std::copy_n(av.data() + i * ca, ca, out.data() + i * (ca + cb));
    std::copy_n(bv.data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
  }
  return a.tape->record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      if (t.needs_grad(a.id)) {
        Matrix& ga = t.grad(a.id);
        for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
      }
      if (t.needs_grad(b.id)) {
        Matrix& gb = t.grad(b.id);
        for (std::size_t j = 0; j < cb; ++j) gb(i, j) += g(i, ca + j);
      }
    }
  });
}

// Stacks equally wide blocks vertically.
inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  Tape& tape = *parts.front().tape;
  const std::size_t cols = parts.front().shape().cols;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    detail::same_tape(parts.front(), p);
    if (p.shape().cols != cols)
      throw ShapeError("concat_rows: width mismatch " + parts.front().shape().str() + " and " + p.shape().str());
    rows += p.shape().rows;
  }
  Matrix out(rows, cols);
  std::size_t r = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + r * cols);
    r += p.shape().rows;
  }
  return tape.record(std::move(out), std::span<const Var>(parts), [parts](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    std::size_t r = 0;
    for (const auto& p : parts) {
      const std::size_t n = t.value(p.id).size();
      if (t.needs_grad(p.id)) {
        Matrix& gp = t.grad(p.id);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[r * g.cols() + i];
      }
      r += t.value(p.id).rows();
    }
  });
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.cols())
    throw ShapeError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") of " + av.shape().str());
  Matrix out(av.rows(), count);
  for (std::size_t i = 0; i < av.rows(); ++i)
    std::copy_n(av.data() + i * av.cols() + begin, count, out.data() + i * count);
  return a.tape->record(std::move(out), {a}, [a, begin, count](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) ga(i, begin + j) += g(i, j);
  });
}

inline Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.rows())
    throw ShapeError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") of " + av.shape().str());
  Matrix out(count, av.cols());
  std::copy_n(av.data() + begin * av.cols(), count * av.cols(), out.data());
  return a.tape->record(std::move(out), {a}, [a, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    const std::size_t off = begin * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
  });
}

// Row lookup (embedding tables, edge sources).
inline Var gather_rows(Var table, std::vector<std::size_t> index) {
  const Matrix& tv = table.value();
  const std::size_t cols = tv.cols();
  Matrix out(index.size(), cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= tv.rows())
      throw ShapeError("gather_rows index " + std::to_string(index[r]) + " outside " + tv.shape().str());
    std::copy_n(tv.data() + index[r] * cols, cols, out.data() + r * cols);
  }
  return table.tape->record(std::move(out), {table}, [table, index = std::move(index)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& gt = t.grad(table.id);
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < index.size(); ++r) {
      double* dst = gt.data() + index[r] * cols;
      const double* src = g.data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
    }
  });
}

// out[index[r]] += a[r]: indexed accumulation into `rows` output rows.
inline Var scatter_add_rows(Var a, std::vector<std::size_t> index, std::size_t rows) {
  const Matrix& av = a.value();
  if (index.size() != av.rows())
    throw ShapeError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " + av.shape().str());
  const std::size_t cols = av.cols();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= rows) throw ShapeError("scatter_add_rows index " + std::to_string(index[r]) + " out of range");
    double* dst = out.data() + index[r] * cols;
    const double* src = av.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
  }
  return a.tape->record(std::move(out), {a}, [a, index = std::move(index)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < index.size(); ++r) {
      const double* src = g.data() + index[r] * cols;
      double* dst = ga.data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
    }
  });
}

inline Var repeat_rows(Var a, std::size_t n) {
  const Matrix& av = a.value();
  if (av.rows() != 1) throw ShapeError("repeat_rows expects a row vector, got " + av.shape().str());
  Matrix out(n, av.cols());
  for (std::size_t r = 0; r < n; ++r) std::copy_n(av.data(), av.cols(), out.data() + r * av.cols());
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t j = 0; j < g.cols(); ++j) ga[j] += g(r, j);
  });
}

// Column sums as a 1xC row.
inline Var sum_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t j = 0; j < av.cols(); ++j) out[j] += av(r, j);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(r, j) += g[j];
  });
}

inline Var sum_all(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(Matrix(1, 1, s), {a}, [a](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(a.id).values()) v += g;
  });
}

inline Var pick(Var a, std::size_t r, std::size_t c) {
  const Matrix& av = a.value();
  if (r >= av.rows() || c >= av.cols())
    throw ShapeError("pick (" + std::to_string(r) + "," + std::to_string(c) + ") from " + av.shape().str());
  return a.tape->record(Matrix(1, 1, av(r, c)), {a}, [a, r, c](Tape& t, std::size_t self) {
    t.grad(a.id)(r, c) += t.grad(self)[0];
  });
}

inline constexpr double kProbClamp = 1e-12;

// -log(p) for a 1x1 probability, with p clamped away from zero.
inline Var neg_log(Var p) {
  const double raw = p.scalar();
  const double v = std::max(raw, kProbClamp);
  return p.tape->record(Matrix(1, 1, -std::log(v)), {p}, [p, raw, v](Tape& t, std::size_t self) {
    if (raw >= kProbClamp) t.grad(p.id)[0] -= t.grad(self)[0] / v;
  });
}

// Mean binary cross entropy over the rows of an Nx1 probability column.
// `positive_weight` scales the y=1 terms; `printed_form` drops the
// (1-y)log(1-p) term.
inline Var binary_cross_entropy(Var probs, const std::vector<int>& labels, double positive_weight = 1.0,
                                bool printed_form = false) {
  const Matrix& pv = probs.value();
  if (pv.size() != labels.size())
    throw ShapeError("binary_cross_entropy: " + std::to_string(labels.size()) + " labels for " + pv.shape().str());
  const double n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(pv[i], kProbClamp, 1.0 - kProbClamp);
    if (labels[i]) {
      loss -= positive_weight * std::log(p);
    } else if (!printed_form) {
      loss -= std::log(1.0 - p);
    }
  }
  loss /= n;
  return probs.tape->record(
      Matrix(1, 1, loss), {probs},
      [probs, labels, positive_weight, printed_form, n](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] / n;
        const Matrix& pv = t.value(probs.id);
        Matrix& gp = t.grad(probs.id);
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const double raw = pv[i];
          if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;
          if (labels[i]) {
            gp[i] -= g * positive_weight / raw;
          } else if (!printed_form) {
            gp[i] += g / (1.0 - raw);
          }
        }
      });
}

}  // namespace kgmn::nn
