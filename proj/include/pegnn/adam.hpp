#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pegnn/tensor.hpp"

namespace pegnn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter set. Moment buffers are
// laid out per parameter in registration order; grads are zeroed after each
// applied step so accumulation always starts fresh.
class AdamState {
 public:
  AdamState(std::vector<Tensor> params, AdamConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  void step() {
    for (const Tensor& p : params_)
      check(p.has_grad(), "adam_step: parameter is missing its gradient");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      const std::vector<double>& g = p.grad();
      std::vector<double>& vals = p.values_mut();
      for (std::size_t j = 0; j < vals.size(); ++j) {
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double m_hat = m_[i][j] / bc1;
        const double v_hat = v_[i][j] / bc2;
        vals[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
      }
      p.zero_grad();
    }
  }

  std::size_t t() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

}  // namespace pegnn
