#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pegnn/tensor.hpp"

namespace pegnn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_param = 0;  // index into the params vector
  std::size_t worst_index = 0;  // flat index within that parameter
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference check of tape gradients. build_loss must rebuild the
// forward pass on the given tape and return the scalar loss; it is invoked
// once with gradients and 2 * numel(params) times value-only. The relative
// error denominator is max(|analytic|, |numeric|, 1e-12).
inline GradCheckResult finite_difference_check(
    const std::function<Tensor(Tape&)>& build_loss,
    const std::vector<Tensor>& params, double h = 1e-5) {
  check(h > 0.0, "finite_difference_check: h must be positive");

  auto eval = [&build_loss]() {
    Tape tape;
    Tensor loss = build_loss(tape);
    const double v = loss.item();
    if (!std::isfinite(v)) throw NumericError("finite_difference_check: non-finite loss");
    return v;
  };

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = build_loss(tape);
    if (!std::isfinite(loss.item()))
      throw NumericError("finite_difference_check: non-finite loss");
    for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
    tape.backward(loss);
    for (const Tensor& p : params) analytic.push_back(p.grad());
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double saved = p.values()[j];
      p.values_mut()[j] = saved + h;
      const double f_plus = eval();
      p.values_mut()[j] = saved - h;
      const double f_minus = eval();
      p.values_mut()[j] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[pi][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = pi;
        result.worst_index = j;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace pegnn
