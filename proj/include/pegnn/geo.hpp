#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "pegnn/error.hpp"
#include "pegnn/matrix.hpp"
#include "pegnn/sparse.hpp"

namespace pegnn {

inline constexpr double kEarthRadiusKm = 6371.0;

struct LonLat {
  double lon = 0.0;  // degrees, [-180, 180]
  double lat = 0.0;  // degrees, [-90, 90]
};

struct GeoPoint {
  LonLat coords;
  std::vector<double> features;
  double target = 0.0;
};

inline bool coords_in_range(const LonLat& c) {
  return c.lon >= -180.0 && c.lon <= 180.0 && c.lat >= -90.0 && c.lat <= 90.0;
}

inline void validate_coords(const LonLat& c) {
  check(coords_in_range(c), "coordinates out of range: lon=" +
                                std::to_string(c.lon) +
                                " lat=" + std::to_string(c.lat));
}

// Great-circle distance on a sphere of radius 6371 km.
inline double haversine_km(const LonLat& a, const LonLat& b) {
  validate_coords(a);
  validate_coords(b);
  constexpr double deg = std::numbers::pi / 180.0;
  const double dphi = (b.lat - a.lat) * deg * 0.5;
  const double dlam = (b.lon - a.lon) * deg * 0.5;
  const double s = std::sin(dphi) * std::sin(dphi) +
                   std::cos(a.lat * deg) * std::cos(b.lat * deg) *
                       std::sin(dlam) * std::sin(dlam);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

enum class EdgeWeighting { kBinary, kInverseDistance };

// Directed kNN adjacency over a point set. Nodes carry exactly
// min(k, n-1) out-edges; no self-loops. Edge weights realize the adjacency
// entries a_ij (1.0 for binary, 1/(1+d_km) for inverse-distance).
struct SpatialGraph {
  struct Edge {
    std::uint32_t src;
    std::uint32_t dst;
    double dist_km;
    double weight;
  };

  std::size_t n = 0;
  std::size_t requested_k = 0;
  std::size_t effective_k = 0;  // < requested_k only when k was clamped to n-1
  std::vector<Edge> edges;

  bool k_was_clamped() const { return effective_k != requested_k; }
};

// Brute-force kNN by great-circle distance; ties broken by ascending point
// index. Batch sizes stay small enough (<= a few thousand) that the O(n^2)
// distance table is the right tool. Neighbor selection runs on squared
// chord distances between unit sphere vectors, which order pairs exactly
// like the haversine distance (|u - v| = 2 sin(dsigma/2)) without a trig
// call per pair; the selected edges then store the great-circle kilometers.
inline SpatialGraph knn_graph(const std::vector<LonLat>& coords, std::size_t k,
                              EdgeWeighting weighting = EdgeWeighting::kBinary) {
  const std::size_t n = coords.size();
  check(n >= 2, "knn_graph needs at least 2 points, got " + std::to_string(n));
  check(k >= 1, "knn_graph needs k >= 1");
  for (const LonLat& c : coords) validate_coords(c);

  SpatialGraph g;
  g.n = n;
  g.requested_k = k;
  g.effective_k = std::min(k, n - 1);

  constexpr double deg = std::numbers::pi / 180.0;
  std::vector<double> ux(n), uy(n), uz(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = coords[i].lat * deg;
    const double lam = coords[i].lon * deg;
    ux[i] = std::cos(phi) * std::cos(lam);
    uy[i] = std::cos(phi) * std::sin(lam);
    uz[i] = std::sin(phi);
  }

  // Symmetric table of squared chords, filled once per pair.
  std::vector<double> chord2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = ux[i] - ux[j];
      const double dy = uy[i] - uy[j];
      const double dz = uz[i] - uz[j];
      const double c2 = dx * dx + dy * dy + dz * dz;
      chord2[i * n + j] = c2;
      chord2[j * n + i] = c2;
    }

  auto chord2_to_km = [](double c2) {
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, 0.5 * std::sqrt(c2)));
  };

  g.edges.reserve(n * g.effective_k);
  std::vector<std::pair<double, std::uint32_t>> cand;
  cand.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cand.emplace_back(chord2[i * n + j], static_cast<std::uint32_t>(j));
    std::partial_sort(cand.begin(), cand.begin() + g.effective_k, cand.end());
    for (std::size_t r = 0; r < g.effective_k; ++r) {
      const double d = chord2_to_km(cand[r].first);
      const double w =
          weighting == EdgeWeighting::kBinary ? 1.0 : 1.0 / (1.0 + d);
      g.edges.push_back({static_cast<std::uint32_t>(i), cand[r].second, d, w});
    }
  }
  return g;
}

// D^{-1/2} (A + I) D^{-1/2} where D is the diagonal degree matrix of (A + I).
// Taking degrees from (A + I) keeps every diagonal entry >= 1, so the
// rescaling is defined even for isolated nodes.
inline SparseMatrix normalize_adjacency(const SpatialGraph& g) {
  std::vector<double> degree(g.n, 1.0);  // the self-loop from A + I
  for (const SpatialGraph::Edge& e : g.edges) degree[e.src] += e.weight;

  std::vector<double> inv_sqrt(g.n);
  for (std::size_t i = 0; i < g.n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

  SparseMatrix out(g.n, g.n);
  out.entries.reserve(g.edges.size() + g.n);
  for (std::size_t i = 0; i < g.n; ++i) out.add(i, i, inv_sqrt[i] * inv_sqrt[i]);
  for (const SpatialGraph::Edge& e : g.edges)
    out.add(e.src, e.dst, e.weight * inv_sqrt[e.src] * inv_sqrt[e.dst]);
  return out;
}

// Row-standardized spatial weights: w_ij = a_ij / sum_j a_ij. Rows without
// neighbors stay all-zero; the diagonal stays zero (no self-loops in A).
inline SparseMatrix row_standardize(const SpatialGraph& g) {
  std::vector<double> row_sum(g.n, 0.0);
  for (const SpatialGraph::Edge& e : g.edges) row_sum[e.src] += e.weight;

  SparseMatrix out(g.n, g.n);
  out.entries.reserve(g.edges.size());
  for (const SpatialGraph::Edge& e : g.edges)
    if (row_sum[e.src] > 0.0) out.add(e.src, e.dst, e.weight / row_sum[e.src]);
  return out;
}

}  // namespace pegnn
