#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "params.hpp"

namespace kgmn::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  double floor = 1e-6;              // added to |numeric| in the denominator
  std::size_t max_per_parameter = 0;  // 0 checks every element
};

// Compares backprop gradients of the scalar `loss` with central differences,
// element by element, over every parameter in `params`.
inline GradCheckResult grad_check(const std::function<Var(Tape&)>& loss, ParamStore& params,
                                  GradCheckOptions opt = {}) {
  params.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Matrix> analytic;
  for (const auto& p : params) analytic.push_back(p.grad);
  params.zero_grad();

  auto evaluate = [&] {
    Tape tape(false);
    return loss(tape).scalar();
  };

  GradCheckResult res;
  std::size_t pi = 0;
  for (auto& p : params) {
    const std::size_t n = p.value.size();
    const std::size_t stride =
        opt.max_per_parameter == 0 || n <= opt.max_per_parameter ? 1 : (n + opt.max_per_parameter - 1) / opt.max_per_parameter;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = p.value[i];
      p.value[i] = saved + opt.step;
      const double up = evaluate();
      p.value[i] = saved - opt.step;
      const double down = evaluate();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = analytic[pi][i];
      const double err = std::abs(a - numeric) / (std::abs(numeric) + opt.floor);
      ++res.checked;
      if (err > res.max_relative_error) {
        res.max_relative_error = err;
        res.worst_parameter = p.name;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
    ++pi;
  }
  return res;
}

}  // namespace kgmn::nn
