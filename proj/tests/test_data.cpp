#include <catch_amalgamated.hpp>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "pegnn/data.hpp"
#include "pegnn/moran.hpp"

using namespace pegnn;

namespace {

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name)
      : path(std::filesystem::temp_directory_path() /
             ("pegnn_test_" + std::to_string(::getpid()) + "_" + name)) {}
  ~TempFile() { std::filesystem::remove(path); }
  void write(const std::string& content) const {
    std::ofstream out(path);
    out << content;
  }
};

}  // namespace

TEST_CASE("load_csv basics") {
  SECTION("three rows, no features") {
    TempFile f("basic.csv");
    f.write("lon,lat,y\n1.0,2.0,3.0\n-10,45,0.5\n0,0,1\n");
    Dataset ds = load_csv(f.path.string(), CsvSchema{});
    REQUIRE(ds.size() == 3);
    CHECK(ds.feature_dim() == 0);
    CHECK(ds.points[1].coords.lon == -10.0);
    CHECK(ds.points[2].target == 1.0);
  }
  SECTION("declared feature columns are picked out of a wider file") {
    TempFile f("features.csv");
    f.write("id,lat,a,lon,y,b\n7,2.0,0.1,1.0,3.0,0.9\n");
    CsvSchema schema;
    schema.feature_cols = {"a", "b"};
    Dataset ds = load_csv(f.path.string(), schema);
    REQUIRE(ds.size() == 1);
    CHECK(ds.points[0].features == std::vector<double>{0.1, 0.9});
    CHECK(ds.points[0].coords.lon == 1.0);
  }
  SECTION("missing column is a schema error") {
    TempFile f("noy.csv");
    f.write("lon,lat\n1,2\n");
    CHECK_THROWS_MATCHES(load_csv(f.path.string(), CsvSchema{}), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("'y'")));
  }
  SECTION("out-of-range latitude is rejected citing the row") {
    TempFile f("badlat.csv");
    f.write("lon,lat,y\n1,2,3\n5,95,1\n");
    CHECK_THROWS_MATCHES(load_csv(f.path.string(), CsvSchema{}), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("line 3")));
  }
  SECTION("non-strict mode keeps the good rows and accounts for the rest") {
    TempFile f("mixed.csv");
    f.write("lon,lat,y\n1,2,3\nx,2,3\n4,5,abc\n6,7,8\n9,91,1\n");
    LoadReport report;
    Dataset ds = load_csv(f.path.string(), CsvSchema{}, /*strict=*/false, &report);
    CHECK(ds.size() == 2);
    CHECK(report.rows_in == 5);
    CHECK(report.rejected.size() == 3);
    CHECK(report.rows_in == ds.size() + report.rejected.size());
  }
  SECTION("strict mode lists at most ten offenders") {
    TempFile f("many_bad.csv");
    std::string content = "lon,lat,y\n";
    for (int i = 0; i < 15; ++i) content += "bad,2,3\n";
    f.write(content);
    try {
      load_csv(f.path.string(), CsvSchema{});
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("15 malformed") != std::string::npos);
      CHECK(msg.find("line 11") != std::string::npos);
      CHECK(msg.find("line 12") == std::string::npos);
    }
  }
}

TEST_CASE("save_csv round trip preserves every value") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-90, 90),
      val(-1e6, 1e6);
  Dataset ds;
  ds.feature_names = {"f0", "f1"};
  for (int i = 0; i < 25; ++i) {
    GeoPoint p;
    p.coords = {lon(rng), lat(rng)};
    p.features = {val(rng), val(rng)};
    p.target = val(rng);
    ds.points.push_back(p);
  }
  TempFile f("roundtrip.csv");
  CsvSchema schema;
  schema.feature_cols = {"f0", "f1"};
  save_csv(ds, f.path.string(), schema);
  Dataset back = load_csv(f.path.string(), schema);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.points[i].coords.lon == ds.points[i].coords.lon);
    CHECK(back.points[i].coords.lat == ds.points[i].coords.lat);
    CHECK(back.points[i].features == ds.points[i].features);
    CHECK(back.points[i].target == ds.points[i].target);
  }
}

TEST_CASE("min-max normalization") {
  Dataset ds;
  for (double t : {10.0, 20.0, 30.0, 40.0}) {
    GeoPoint p;
    p.coords = {t, t / 2};
    p.target = t;
    p.features = {7.0};  // constant column
    ds.points.push_back(p);
  }
  ds.feature_names = {"c"};
  Split split;
  split.train = {0, 1, 2};
  split.test = {3};

  Dataset norm = fit_apply_minmax(ds, split);
  SECTION("train targets span [0,1]") {
    CHECK(norm.target_norm[0] == 0.0);
    CHECK(norm.target_norm[1] == 0.5);
    CHECK(norm.target_norm[2] == 1.0);
  }
  SECTION("test values extrapolate without clamping") {
    CHECK(norm.target_norm[3] == 1.5);
  }
  SECTION("constant feature maps to zero, no division by zero") {
    for (std::size_t i = 0; i < 4; ++i) CHECK(norm.features_norm.at(i, 0) == 0.0);
  }
  SECTION("inverse transform recovers the originals") {
    const Normalizers& nz = *norm.norm;
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK_THAT(nz.target.invert(norm.target_norm[i]),
                 Catch::Matchers::WithinAbs(ds.points[i].target, 1e-12));
      CHECK_THAT(nz.lon.invert(norm.coords_norm.at(i, 0)),
                 Catch::Matchers::WithinAbs(ds.points[i].coords.lon, 1e-12));
      CHECK_THAT(nz.features[0].invert(norm.features_norm.at(i, 0)),
                 Catch::Matchers::WithinAbs(7.0, 1e-12));
    }
  }
  SECTION("empty train split is rejected") {
    Split bad;
    bad.test = {0, 1, 2, 3};
    CHECK_THROWS_AS(fit_apply_minmax(ds, bad), ValidationError);
  }
}

TEST_CASE("train_test_split") {
  SECTION("10 points at fraction 0.2 -> 8/2 disjoint exhaustive") {
    Split s = train_test_split(10, 0.2, 1);
    CHECK(s.train.size() == 8);
    CHECK(s.test.size() == 2);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 10);
  }
  SECTION("same seed gives the same split") {
    Split a = train_test_split(100, 0.25, 9);
    Split b = train_test_split(100, 0.25, 9);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
  }
  SECTION("different seeds give different splits") {
    bool any_difference = false;
    Split base = train_test_split(100, 0.2, 0);
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
      if (train_test_split(100, 0.2, seed).test != base.test) any_difference = true;
    CHECK(any_difference);
  }
  SECTION("degenerate inputs error") {
    CHECK_THROWS_AS(train_test_split(3, 0.2, 1), ValidationError);
    CHECK_THROWS_AS(train_test_split(100, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(train_test_split(100, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(train_test_split(100, 0.001, 1), ValidationError);
  }
}

TEST_CASE("synthetic field generation") {
  SECTION("fixed seed is bit-reproducible") {
    Dataset a = synth_generate(50, 123);
    Dataset b = synth_generate(50, 123);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(a.points[i].coords.lon == b.points[i].coords.lon);
      CHECK(a.points[i].target == b.points[i].target);
    }
  }
  SECTION("coordinates live in the unit-degree patch; no features") {
    Dataset ds = synth_generate(200, 4);
    CHECK(ds.feature_dim() == 0);
    for (const GeoPoint& p : ds.points) {
      CHECK(p.coords.lon >= 0.0);
      CHECK(p.coords.lon <= 1.0);
      CHECK(p.coords.lat >= 0.0);
      CHECK(p.coords.lat <= 1.0);
    }
  }
  SECTION("the field is spatially autocorrelated under k=5 weights") {
    Dataset ds = synth_generate(500, 9);
    MoranResult r =
        local_moran(ds.targets_raw(), row_standardize(knn_graph(ds.coords(), 5)));
    double mean = 0.0;
    for (double v : r.values) mean += v;
    CHECK(mean / static_cast<double>(r.values.size()) > 0.1);
  }
  SECTION("zero noise makes y a pure function of the coordinates") {
    Dataset ds = synth_generate(30, 5, {1.0, 2.0}, 0.0);
    // recompute y for a point from another dataset with the same seed
    Dataset again = synth_generate(30, 5, {1.0, 2.0}, 0.0);
    for (std::size_t i = 0; i < 30; ++i) CHECK(ds.points[i].target == again.points[i].target);
  }
  SECTION("n below 10 is rejected") {
    CHECK_THROWS_AS(synth_generate(5, 1), ValidationError);
  }
}

TEST_CASE("subset keeps raw and normalized views aligned") {
  Dataset ds = synth_generate(40, 8);
  Split split = train_test_split(40, 0.25, 2);
  Dataset norm = fit_apply_minmax(ds, split);
  Dataset test = subset(norm, split.test);
  REQUIRE(test.size() == split.test.size());
  for (std::size_t r = 0; r < test.size(); ++r) {
    const std::size_t i = split.test[r];
    CHECK(test.points[r].coords.lon == norm.points[i].coords.lon);
    CHECK(test.target_norm[r] == norm.target_norm[i]);
    CHECK(test.coords_norm.at(r, 1) == norm.coords_norm.at(i, 1));
  }
}
