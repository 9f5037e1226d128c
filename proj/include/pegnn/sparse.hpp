#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pegnn/matrix.hpp"

namespace pegnn {

// Coordinate-list sparse matrix. Per-batch kNN graphs carry exactly
// k * n_batch directed edges, so a COO list is all the structure needed.
struct SparseMatrix {
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Entry> entries;

  SparseMatrix() = default;
  SparseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c) {}

  void add(std::size_t r, std::size_t c, double v) {
    entries.push_back({static_cast<std::uint32_t>(r),
                       static_cast<std::uint32_t>(c), v});
  }

  Matrix to_dense() const {
    Matrix out(rows, cols);
    for (const Entry& e : entries) out.at(e.row, e.col) += e.value;
    return out;
  }
};

// out = S * h, with h and out as row-major (S.cols x d) and (S.rows x d).
inline void spmm_apply(const SparseMatrix& s, const double* h, double* out,
                       std::size_t d) {
  for (const SparseMatrix::Entry& e : s.entries) {
    const double* src = h + static_cast<std::size_t>(e.col) * d;
    double* dst = out + static_cast<std::size_t>(e.row) * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += e.value * src[j];
  }
}

// out = S^T * g; used by the backward pass of the sparse product.
inline void spmm_apply_transposed(const SparseMatrix& s, const double* g,
                                  double* out, std::size_t d) {
  for (const SparseMatrix::Entry& e : s.entries) {
    const double* src = g + static_cast<std::size_t>(e.row) * d;
    double* dst = out + static_cast<std::size_t>(e.col) * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += e.value * src[j];
  }
}

}  // namespace pegnn
