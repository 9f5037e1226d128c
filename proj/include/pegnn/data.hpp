#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pegnn/geo.hpp"
#include "pegnn/matrix.hpp"

namespace pegnn {

struct CsvSchema {
  std::string lon_col = "lon";
  std::string lat_col = "lat";
  std::string target_col = "y";
  std::vector<std::string> feature_cols;
};

struct MinMax {
  double lo = 0.0;
  double hi = 0.0;
  // Constant columns map to 0.0; inversion then restores the constant.
  double apply(double v) const { return hi == lo ? 0.0 : (v - lo) / (hi - lo); }
  double invert(double v) const { return hi == lo ? lo : v * (hi - lo) + lo; }
};

struct Normalizers {
  MinMax lon, lat, target;
  std::vector<MinMax> features;
};

// A point set plus, once fitted, min-max normalized views of coordinates,
// features and targets. Raw coordinates are kept alongside: graphs are
// built from real geometry while the encoder and the network consume the
// [0, 1]-scaled copies.
struct Dataset {
  std::vector<GeoPoint> points;
  std::vector<std::string> feature_names;

  std::optional<Normalizers> norm;
  Matrix coords_norm;               // n x 2 (lon, lat)
  Matrix features_norm;             // n x p
  std::vector<double> target_norm;  // n

  std::size_t size() const { return points.size(); }
  std::size_t feature_dim() const { return feature_names.size(); }
  bool normalized() const { return norm.has_value(); }

  std::vector<LonLat> coords() const {
    std::vector<LonLat> out;
    out.reserve(points.size());
    for (const GeoPoint& p : points) out.push_back(p.coords);
    return out;
  }

  std::vector<double> targets_raw() const {
    std::vector<double> out;
    out.reserve(points.size());
    for (const GeoPoint& p : points) out.push_back(p.target);
    return out;
  }
};

struct LoadReport {
  struct BadRow {
    std::size_t line;  // 1-based line number in the file
    std::string reason;
  };
  std::size_t rows_in = 0;  // data rows seen (header excluded)
  std::vector<BadRow> rejected;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string_view field =
        trim(std::string_view(line).substr(start, comma == std::string::npos
                                                      ? std::string::npos
                                                      : comma - start));
    out.emplace_back(field);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Comma-separated, '.' decimal, first line header, no quoting. Rows with a
// missing or non-numeric declared field, or with out-of-range coordinates,
// are rejected with their line number. strict mode fails the whole load when
// any row was rejected (first 10 offenders listed); otherwise the rejects
// are only reported, and rows_in always equals parsed + rejected.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema,
                        bool strict = true, LoadReport* report = nullptr) {
  std::ifstream in(path);
  check(in.good(), "cannot open CSV file: " + path);

  std::string line;
  check(static_cast<bool>(std::getline(in, line)), "empty CSV file: " + path);
  const std::vector<std::string> header = detail::split_csv_line(line);

  auto column_index = [&header, &path](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ValidationError("column '" + name + "' not found in header of " + path);
  };

  const std::size_t lon_idx = column_index(schema.lon_col);
  const std::size_t lat_idx = column_index(schema.lat_col);
  const std::size_t target_idx = column_index(schema.target_col);
  std::vector<std::size_t> feature_idx;
  for (const std::string& name : schema.feature_cols)
    feature_idx.push_back(column_index(name));

  Dataset ds;
  ds.feature_names = schema.feature_cols;
  LoadReport local_report;
  LoadReport& rep = report ? *report : local_report;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++rep.rows_in;
    const std::vector<std::string> fields = detail::split_csv_line(line);

    auto reject = [&rep, line_no](const std::string& reason) {
      rep.rejected.push_back({line_no, reason});
    };

    std::size_t max_idx = std::max({lon_idx, lat_idx, target_idx});
    for (std::size_t f : feature_idx) max_idx = std::max(max_idx, f);
    if (fields.size() <= max_idx) {
      reject("too few fields (" + std::to_string(fields.size()) + ")");
      continue;
    }

    GeoPoint p;
    bool ok = true;
    auto parse_field = [&fields, &ok, &reject](std::size_t idx, const char* what,
                                               double& out) {
      if (!detail::parse_double(fields[idx], out)) {
        reject(std::string("non-numeric ") + what + " '" + fields[idx] + "'");
        ok = false;
      }
    };
    parse_field(lon_idx, "longitude", p.coords.lon);
    if (ok) parse_field(lat_idx, "latitude", p.coords.lat);
    if (ok) parse_field(target_idx, "target", p.target);
    if (ok) {
      p.features.resize(feature_idx.size());
      for (std::size_t f = 0; f < feature_idx.size() && ok; ++f)
        parse_field(feature_idx[f], "feature", p.features[f]);
    }
    if (!ok) continue;
    if (!coords_in_range(p.coords)) {
      reject("coordinates out of range: lon=" + std::to_string(p.coords.lon) +
             " lat=" + std::to_string(p.coords.lat));
      continue;
    }
    ds.points.push_back(std::move(p));
  }

  if (strict && !rep.rejected.empty()) {
    std::ostringstream msg;
    msg << path << ": " << rep.rejected.size() << " malformed row(s); first offenders:";
    const std::size_t show = std::min<std::size_t>(rep.rejected.size(), 10);
    for (std::size_t i = 0; i < show; ++i)
      msg << "\n  line " << rep.rejected[i].line << ": " << rep.rejected[i].reason;
    throw ValidationError(msg.str());
  }
  return ds;
}

// Mirror of load_csv, writing raw (unnormalized) values with enough digits
// to round-trip f64 exactly. Column order: lon, lat, features..., target.
inline void save_csv(const Dataset& ds, const std::string& path,
                     const CsvSchema& schema = {}) {
  std::ofstream out(path);
  check(out.good(), "cannot open CSV file for writing: " + path);
  out << schema.lon_col << "," << schema.lat_col;
  for (const std::string& name : ds.feature_names) out << "," << name;
  out << "," << schema.target_col << "\n";
  for (const GeoPoint& p : ds.points) {
    out << detail::format_double(p.coords.lon) << ","
        << detail::format_double(p.coords.lat);
    for (double f : p.features) out << "," << detail::format_double(f);
    out << "," << detail::format_double(p.target) << "\n";
  }
  check(out.good(), "write failed: " + path);
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
};

inline Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  check(n >= 4, "train_test_split needs at least 4 points, got " + std::to_string(n));
  check(test_fraction > 0.0 && test_fraction < 1.0,
        "test_fraction must lie strictly between 0 and 1");
  const std::size_t n_test =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  check(n_test >= 1 && n_test < n,
        "degenerate split: " + std::to_string(n_test) + " test points of " +
            std::to_string(n));

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  Split split;
  split.seed = seed;
  split.test_fraction = test_fraction;
  split.test.assign(idx.begin(), idx.begin() + n_test);
  split.train.assign(idx.begin() + n_test, idx.end());
  return split;
}

// Applies already-fitted parameters to every point; values outside the
// fitted range map outside [0, 1] (no clamping).
inline Dataset apply_minmax(const Dataset& ds, const Normalizers& norm) {
  check(norm.features.size() == ds.feature_dim(),
        "apply_minmax: normalizer has " + std::to_string(norm.features.size()) +
            " feature columns, dataset has " + std::to_string(ds.feature_dim()));
  Dataset out = ds;
  out.norm = norm;
  const std::size_t n = ds.size();
  out.coords_norm = Matrix(n, 2);
  out.features_norm = Matrix(n, ds.feature_dim());
  out.target_norm.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.coords_norm.at(i, 0) = norm.lon.apply(ds.points[i].coords.lon);
    out.coords_norm.at(i, 1) = norm.lat.apply(ds.points[i].coords.lat);
    out.target_norm[i] = norm.target.apply(ds.points[i].target);
    for (std::size_t f = 0; f < ds.feature_dim(); ++f)
      out.features_norm.at(i, f) = norm.features[f].apply(ds.points[i].features[f]);
  }
  return out;
}

// Fits min-max parameters on the training indices only, then applies them to
// every point.
inline Dataset fit_apply_minmax(const Dataset& ds, const Split& split) {
  check(!split.train.empty(), "fit_apply_minmax: empty train split");
  check(ds.size() > 0, "fit_apply_minmax: empty dataset");

  auto fit = [&split](auto&& get) {
    MinMax mm{get(split.train[0]), get(split.train[0])};
    for (std::size_t i : split.train) {
      mm.lo = std::min(mm.lo, get(i));
      mm.hi = std::max(mm.hi, get(i));
    }
    return mm;
  };

  Normalizers norm;
  norm.lon = fit([&ds](std::size_t i) { return ds.points[i].coords.lon; });
  norm.lat = fit([&ds](std::size_t i) { return ds.points[i].coords.lat; });
  norm.target = fit([&ds](std::size_t i) { return ds.points[i].target; });
  for (std::size_t f = 0; f < ds.feature_dim(); ++f)
    norm.features.push_back(fit([&ds, f](std::size_t i) { return ds.points[i].features[f]; }));

  return apply_minmax(ds, norm);
}

// Row selection that keeps normalized views and fitted parameters aligned.
inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.norm = ds.norm;
  out.points.reserve(idx.size());
  for (std::size_t i : idx) {
    check(i < ds.size(), "subset index out of range");
    out.points.push_back(ds.points[i]);
  }
  if (ds.normalized()) {
    const std::size_t p = ds.feature_dim();
    out.coords_norm = Matrix(idx.size(), 2);
    out.features_norm = Matrix(idx.size(), p);
    out.target_norm.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.coords_norm.at(r, 0) = ds.coords_norm.at(idx[r], 0);
      out.coords_norm.at(r, 1) = ds.coords_norm.at(idx[r], 1);
      for (std::size_t f = 0; f < p; ++f)
        out.features_norm.at(r, f) = ds.features_norm.at(idx[r], f);
      out.target_norm[r] = ds.target_norm[idx[r]];
    }
  }
  return out;
}

// Synthetic spatially autocorrelated field on a 1-degree square patch:
// uniform coordinates and a sum of seeded sinusoid products,
//   y(c) = sum_f sin(2 pi f lon + phi_f) * sin(2 pi f lat + psi_f) + noise,
// giving a smooth surface for interpolation tests (no node features).
// Phases are drawn before the points, so a fixed seed yields the same
// underlying field at any n.
inline Dataset synth_generate(std::size_t n, std::uint64_t seed,
                              const std::vector<double>& frequencies = {1.0, 2.0, 3.0},
                              double noise_amplitude = 0.05) {
  check(n >= 10, "synth_generate needs n >= 10, got " + std::to_string(n));
  check(!frequencies.empty(), "synth_generate needs at least one frequency");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::pair<double, double>> phases;
  phases.reserve(frequencies.size());
  for (std::size_t f = 0; f < frequencies.size(); ++f) {
    const double a = phase(rng);
    const double b = phase(rng);
    phases.emplace_back(a, b);
  }

  Dataset ds;
  ds.points.reserve(n);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    GeoPoint p;
    p.coords.lon = unit(rng);
    p.coords.lat = unit(rng);
    double y = 0.0;
    for (std::size_t f = 0; f < frequencies.size(); ++f)
      y += std::sin(two_pi * frequencies[f] * p.coords.lon + phases[f].first) *
           std::sin(two_pi * frequencies[f] * p.coords.lat + phases[f].second);
    if (noise_amplitude != 0.0) y += noise_amplitude * gauss(rng);
    p.target = y;
    ds.points.push_back(std::move(p));
  }
  return ds;
}

}  // namespace pegnn
