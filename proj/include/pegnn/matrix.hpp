#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pegnn/error.hpp"

namespace pegnn {

// Plain row-major dense matrix for the non-differentiable parts of the
// pipeline (coordinates, sinusoidal features, CSV payloads). Autodiff
// tensors live in tensor.hpp; this type carries no gradient state.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace pegnn
