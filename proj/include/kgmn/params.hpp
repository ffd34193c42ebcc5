#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "tensor.hpp"

namespace kgmn::nn {

// Deterministic uniform draws from a 64-bit Mersenne twister.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) {
    if (n == 0) return 0;
    // rejection keeps the draw unbiased
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

enum class Init { Zeros, Embedding, Glorot };

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
};

struct ParamRef {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const noexcept { return index != static_cast<std::size_t>(-1); }
};

// Named parameters plus Adam state. Element addresses are stable.
class ParamStore {
 public:
  ParamRef add(const std::string& name, std::size_t rows, std::size_t cols, Init init, Rng& rng) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    Parameter p;
    p.name = name;
    p.value = Matrix(rows, cols);
    if (init == Init::Embedding) {
      for (auto& v : p.value.values()) v = rng.uniform(-0.1, 0.1);
    } else if (init == Init::Glorot) {
      const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (auto& v : p.value.values()) v = rng.uniform(-limit, limit);
    }
    p.grad = Matrix(rows, cols);
    p.first_moment = Matrix(rows, cols);
    p.second_moment = Matrix(rows, cols);
    params_.push_back(std::move(p));
    index_[name] = params_.size() - 1;
    return ParamRef{params_.size() - 1};
  }

  Parameter& operator[](ParamRef r) { return params_.at(r.index); }
  const Parameter& operator[](ParamRef r) const { return params_.at(r.index); }
  Parameter* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Parameter* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  std::size_t size() const noexcept { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

  std::size_t step() const noexcept { return step_; }
  void set_step(std::size_t s) noexcept { step_ = s; }

  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
  }
  void restore(const std::vector<Matrix>& values) {
    if (values.size() != params_.size()) throw std::invalid_argument("snapshot does not match parameters");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i];
  }

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::size_t step_ = 0;
};

struct AdamConfig {
  double learning_rate = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 0.95;                // multiplicative lr decay ...
  std::size_t decay_interval = 3000;  // ... applied once per this many steps
  double clip_norm = 5.0;             // global gradient norm; <= 0 disables

  // Learning rate after `completed_steps` updates.
  double rate_at(std::size_t completed_steps) const {
    if (decay_interval == 0) return learning_rate;
    return learning_rate * std::pow(decay, static_cast<double>(completed_steps / decay_interval));
  }
};

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
inline double clip_gradients(ParamStore& params, double max_norm) {
  double total = 0.0;
  for (const auto& p : params) total += squared_norm(p.grad);
  const double norm = std::sqrt(total);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params) p.grad *= s;
  }
  return norm;
}

// One bias-corrected Adam update from the accumulated gradients, which are
// cleared afterwards.
inline void adam_step(ParamStore& params, const AdamConfig& cfg) {
  for (const auto& p : params)
    if (!all_finite(p.grad)) throw TrainingAborted("non-finite gradient in parameter '" + p.name + "'");
  clip_gradients(params, cfg.clip_norm);

  const double lr = cfg.rate_at(params.step());
  const double t = static_cast<double>(params.step() + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : params) {
    auto g = p.grad.values();
    auto m = p.first_moment.values();
    auto v = p.second_moment.values();
    auto w = p.value.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
    p.grad.fill(0.0);
  }
  params.set_step(params.step() + 1);
}

}  // namespace kgmn::nn
