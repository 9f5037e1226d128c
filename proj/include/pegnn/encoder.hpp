#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "pegnn/matrix.hpp"
#include "pegnn/tensor.hpp"

namespace pegnn {

// Grid scales of the sinusoidal transform: a geometric progression of S
// wavelengths from sigma_min to sigma_max, analogous to kernel lengthscales.
struct SinusoidalConfig {
  double sigma_min = 0.01;
  double sigma_max = 1.0;
  std::size_t num_scales = 16;  // S

  void validate() const {
    check(sigma_min > 0.0, "sigma_min must be positive");
    check(sigma_max > sigma_min, "sigma_max must exceed sigma_min");
    check(num_scales >= 2,
          "num_scales must be >= 2: the scale exponent s/(S-1) is undefined for S=1");
  }

  double scale(std::size_t s) const {
    const double g = sigma_max / sigma_min;
    return sigma_min * std::pow(g, static_cast<double>(s) /
                                       static_cast<double>(num_scales - 1));
  }

  // 2 spatial dims x (cos, sin) x S scales.
  std::size_t output_width() const { return 4 * num_scales; }
};

// Deterministic, parameter-free multi-scale transform of n x 2 coordinates
// into n x 4S sinusoidal features. Layout is scale-major, then dimension,
// with cos before sin:
//   [cos(c0/s0), sin(c0/s0), cos(c1/s0), sin(c1/s0), cos(c0/s1), ...]
// The layout is part of the checkpoint contract; changing it breaks saved
// projection weights.
inline Matrix sinusoidal_transform(const Matrix& coords, const SinusoidalConfig& cfg) {
  cfg.validate();
  check(coords.cols == 2, "sinusoidal_transform expects n x 2 coordinates, got " +
                              std::to_string(coords.cols) + " columns");
  const std::size_t n = coords.rows;
  const std::size_t width = cfg.output_width();
  Matrix out(n, width);
  std::vector<double> inv_scale(cfg.num_scales);
  for (std::size_t s = 0; s < cfg.num_scales; ++s) inv_scale[s] = 1.0 / cfg.scale(s);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data.data() + i * width;
    std::size_t col = 0;
    for (std::size_t s = 0; s < cfg.num_scales; ++s)
      for (std::size_t v = 0; v < 2; ++v) {
        const double arg = coords.at(i, v) * inv_scale[s];
        row[col++] = std::cos(arg);
        row[col++] = std::sin(arg);
      }
  }
  return out;
}

// PE(C) = sigmoid(ST(C) * W + b): the transform above followed by a single
// learnable projection. Only W and b carry gradients.
class PositionalEncoder {
 public:
  PositionalEncoder() = default;

  PositionalEncoder(const SinusoidalConfig& cfg, std::size_t emb_dim,
                    std::mt19937_64& rng)
      : cfg_(cfg), emb_dim_(emb_dim) {
    cfg_.validate();
    check(emb_dim >= 1, "emb_dim must be >= 1");
    const std::size_t in = cfg_.output_width();
    const double limit = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(in * emb_dim);
    for (double& v : w) v = dist(rng);
    weight_ = Tensor::from({in, emb_dim}, std::move(w), /*requires_grad=*/true);
    bias_ = Tensor::zeros({emb_dim}, /*requires_grad=*/true);
  }

  const SinusoidalConfig& config() const { return cfg_; }
  std::size_t emb_dim() const { return emb_dim_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

  Tensor forward(Tape& tape, const Matrix& coords) const {
    check(coords.cols == 2, "positional encoder expects n x 2 coordinates, got " +
                                std::to_string(coords.cols) + " columns");
    Matrix st = sinusoidal_transform(coords, cfg_);
    Tensor features = Tensor::from({st.rows, st.cols}, std::move(st.data));
    Tensor projected = tape.add_row_bias(tape.matmul(features, weight_), bias_);
    return tape.sigmoid(projected);
  }

 private:
  SinusoidalConfig cfg_;
  std::size_t emb_dim_ = 0;
  Tensor weight_;
  Tensor bias_;
};

inline Tensor pe_forward(Tape& tape, const Matrix& coords,
                         const PositionalEncoder& enc) {
  return enc.forward(tape, coords);
}

}  // namespace pegnn
