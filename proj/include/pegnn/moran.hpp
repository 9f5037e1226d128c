#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pegnn/geo.hpp"
#include "pegnn/sparse.hpp"

namespace pegnn {

struct MoranResult {
  std::vector<double> values;
  SparseMatrix weights_used;
  bool degenerate = false;  // constant input; all values forced to zero
};

// Local Moran's I per observation, with deviations taken from the global
// mean of y:
//
//   I_i = (n-1) * (y_i - ybar) / sum_j (y_j - ybar)^2 * sum_{j!=i} w_ij (y_j - ybar)
//
// w must be row-standardized with a zero diagonal. A (numerically) constant
// y has no spatial structure to measure; that case returns all zeros with
// the degenerate flag set instead of erroring, so a constant-target batch
// cannot abort a training run.
inline MoranResult local_moran(const std::vector<double>& y, const SparseMatrix& w) {
  const std::size_t n = y.size();
  check(n >= 2, "local_moran needs at least 2 observations, got " + std::to_string(n));
  check(w.rows == n && w.cols == n,
        "local_moran weight matrix is " + std::to_string(w.rows) + "x" +
            std::to_string(w.cols) + " for " + std::to_string(n) + " observations");
  for (const SparseMatrix::Entry& e : w.entries)
    check(e.row != e.col || e.value == 0.0,
          "local_moran weights must have a zero diagonal (nonzero at " +
              std::to_string(e.row) + ")");

  MoranResult result;
  result.weights_used = w;
  result.values.assign(n, 0.0);

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);

  double denom = 0.0;
  for (double v : y) denom += (v - mean) * (v - mean);
  if (denom < 1e-12) {
    result.degenerate = true;
    return result;
  }

  std::vector<double> lag(n, 0.0);  // sum_j w_ij (y_j - ybar)
  for (const SparseMatrix::Entry& e : w.entries)
    lag[e.row] += e.value * (y[e.col] - mean);

  const double scale = static_cast<double>(n - 1) / denom;
  for (std::size_t i = 0; i < n; ++i)
    result.values[i] = scale * (y[i] - mean) * lag[i];
  return result;
}

// Auxiliary-task targets for one batch: row-standardize the batch graph and
// evaluate local Moran's I on the batch outcomes. Rebuilt from scratch for
// every batch, so a point's target varies with whichever neighbors the
// batch sampling handed it. These are training labels; nothing here touches
// the autodiff tape.
inline std::vector<double> batch_moran_target(const std::vector<double>& batch_y,
                                              const SpatialGraph& batch_graph) {
  check(batch_graph.n == batch_y.size(),
        "batch_moran_target: graph has " + std::to_string(batch_graph.n) +
            " nodes for " + std::to_string(batch_y.size()) + " outcomes");
  return local_moran(batch_y, row_standardize(batch_graph)).values;
}

}  // namespace pegnn
