#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pegnn/data.hpp"
#include "pegnn/geo.hpp"
#include "pegnn/moran.hpp"
#include "support/moran_oracle.hpp"

using namespace pegnn;
using pegnn_test::moran_brute_force;

namespace {

SparseMatrix mutual_pair_weights() {
  SparseMatrix w(2, 2);
  w.add(0, 1, 1.0);
  w.add(1, 0, 1.0);
  return w;
}

}  // namespace

TEST_CASE("local_moran hand-evaluated cases") {
  SECTION("two antithetical points") {
    MoranResult r = local_moran({1.0, -1.0}, mutual_pair_weights());
    CHECK_THAT(r.values[0], Catch::Matchers::WithinAbs(-0.5, 1e-15));
    CHECK_THAT(r.values[1], Catch::Matchers::WithinAbs(-0.5, 1e-15));
    CHECK(!r.degenerate);
  }
  SECTION("alternating ring of four") {
    SparseMatrix w(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      w.add(i, (i + 1) % 4, 0.5);
      w.add(i, (i + 3) % 4, 0.5);
    }
    MoranResult r = local_moran({1, -1, 1, -1}, w);
    for (double v : r.values) CHECK_THAT(v, Catch::Matchers::WithinAbs(-0.75, 1e-15));
  }
}

TEST_CASE("local_moran degeneracy and contract errors") {
  SECTION("constant input returns zeros with the flag set") {
    SparseMatrix w = mutual_pair_weights();
    MoranResult r = local_moran({3.0, 3.0}, w);
    CHECK(r.degenerate);
    CHECK(r.values == std::vector<double>{0.0, 0.0});
  }
  SECTION("nonzero diagonal is rejected") {
    SparseMatrix w(2, 2);
    w.add(0, 0, 1.0);
    w.add(1, 0, 1.0);
    CHECK_THROWS_AS(local_moran({1.0, 2.0}, w), ValidationError);
  }
  SECTION("fewer than two observations is rejected") {
    SparseMatrix w(1, 1);
    CHECK_THROWS_AS(local_moran({1.0}, w), ValidationError);
  }
}

TEST_CASE("local_moran matches the dense brute-force oracle") {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> nd(5, 20);
    const std::size_t n = nd(rng);
    std::uniform_int_distribution<std::size_t> kd(1, std::min<std::size_t>(4, n - 1));
    const std::size_t k = kd(rng);

    std::vector<LonLat> coords(n);
    for (auto& c : coords) c = {pos(rng), pos(rng)};
    std::vector<double> y(n);
    for (double& v : y) v = gauss(rng);

    SpatialGraph g = knn_graph(coords, k);
    MoranResult lib = local_moran(y, row_standardize(g));

    SparseMatrix adj(n, n);
    for (const auto& e : g.edges) adj.add(e.src, e.dst, 1.0);
    std::vector<double> oracle = moran_brute_force(y, adj.to_dense());

    for (std::size_t i = 0; i < n; ++i) {
      const double denom =
          std::max({std::abs(lib.values[i]), std::abs(oracle[i]), 1e-12});
      CHECK(std::abs(lib.values[i] - oracle[i]) / denom < 1e-10);
    }
  }
}

TEST_CASE("local_moran is affine invariant") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  const std::size_t n = 30;
  std::vector<LonLat> coords(n);
  for (auto& c : coords) c = {pos(rng), pos(rng)};
  std::vector<double> y(n);
  for (double& v : y) v = gauss(rng);
  SparseMatrix w = row_standardize(knn_graph(coords, 4));
  const MoranResult base = local_moran(y, w);

  std::uniform_real_distribution<double> coeff(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    double a = coeff(rng);
    if (std::abs(a) < 0.1) a = 0.1;
    const double b = coeff(rng);
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = a * y[i] + b;
    MoranResult r = local_moran(scaled, w);
    for (std::size_t i = 0; i < n; ++i)
      CHECK_THAT(r.values[i], Catch::Matchers::WithinAbs(base.values[i], 1e-9));
  }
}

TEST_CASE("local_moran is permutation equivariant") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = 12;
  std::vector<double> y(n);
  for (double& v : y) v = gauss(rng);
  SparseMatrix w(n, n);
  // directed ring with two forward neighbors
  for (std::size_t i = 0; i < n; ++i) {
    w.add(i, (i + 1) % n, 0.5);
    w.add(i, (i + 2) % n, 0.5);
  }
  MoranResult base = local_moran(y, w);

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<double> y2(n);
  SparseMatrix w2(n, n);
  for (std::size_t i = 0; i < n; ++i) y2[perm[i]] = y[i];
  for (const auto& e : w.entries) w2.add(perm[e.row], perm[e.col], e.value);
  MoranResult moved = local_moran(y2, w2);
  for (std::size_t i = 0; i < n; ++i)
    CHECK_THAT(moved.values[perm[i]], Catch::Matchers::WithinAbs(base.values[i], 1e-12));
}

TEST_CASE("sign behavior on smooth and checkerboard fields") {
  SECTION("smooth field: y = latitude has positive mean autocorrelation") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    const std::size_t n = 200;
    std::vector<LonLat> coords(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      coords[i] = {pos(rng), pos(rng)};
      y[i] = coords[i].lat;
    }
    MoranResult r = local_moran(y, row_standardize(knn_graph(coords, 5)));
    double mean = 0.0;
    for (double v : r.values) mean += v;
    CHECK(mean / static_cast<double>(n) > 0.0);
  }
  SECTION("checkerboard: every point anti-correlates with its neighbors") {
    // 5x5 grid on a 0.4-degree patch; with k=2 every node's nearest
    // neighbors are rook-adjacent and therefore opposite in sign
    std::vector<LonLat> coords;
    std::vector<double> y;
    for (int row = 0; row < 5; ++row)
      for (int col = 0; col < 5; ++col) {
        coords.push_back({0.1 * col, 0.1 * row});
        y.push_back(((row + col) % 2 == 0) ? 1.0 : -1.0);
      }
    MoranResult r = local_moran(y, row_standardize(knn_graph(coords, 2)));
    for (double v : r.values) CHECK(v < 0.0);
  }
}

TEST_CASE("batch_moran_target") {
  SECTION("full-dataset batch reduces to local_moran") {
    std::mt19937_64 rng(77);
    Dataset ds = synth_generate(50, 5);
    SpatialGraph g = knn_graph(ds.coords(), 5);
    std::vector<double> via_batch = batch_moran_target(ds.targets_raw(), g);
    MoranResult direct = local_moran(ds.targets_raw(), row_standardize(g));
    CHECK(via_batch == direct.values);
  }
  SECTION("two antithetical points") {
    SpatialGraph g;
    g.n = 2;
    g.edges = {{0, 1, 1.0, 1.0}, {1, 0, 1.0, 1.0}};
    std::vector<double> t = batch_moran_target({1.0, -1.0}, g);
    CHECK_THAT(t[0], Catch::Matchers::WithinAbs(-0.5, 1e-15));
    CHECK_THAT(t[1], Catch::Matchers::WithinAbs(-0.5, 1e-15));
  }
  SECTION("a shared point gets different targets in different batches") {
    Dataset ds = synth_generate(60, 21);
    const std::vector<double> y = ds.targets_raw();
    const std::vector<LonLat> coords = ds.coords();

    // batch A: points 0..29, batch B: point 0 plus points 30..58
    std::vector<LonLat> ca, cb;
    std::vector<double> ya, yb;
    for (std::size_t i = 0; i < 30; ++i) {
      ca.push_back(coords[i]);
      ya.push_back(y[i]);
    }
    cb.push_back(coords[0]);
    yb.push_back(y[0]);
    for (std::size_t i = 30; i < 59; ++i) {
      cb.push_back(coords[i]);
      yb.push_back(y[i]);
    }
    std::vector<double> ia = batch_moran_target(ya, knn_graph(ca, 5));
    std::vector<double> ib = batch_moran_target(yb, knn_graph(cb, 5));
    CHECK(std::abs(ia[0] - ib[0]) > 1e-9);
  }
}
