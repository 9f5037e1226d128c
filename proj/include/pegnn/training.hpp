#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pegnn/adam.hpp"
#include "pegnn/data.hpp"
#include "pegnn/geo.hpp"
#include "pegnn/model.hpp"
#include "pegnn/moran.hpp"
#include "pegnn/tensor.hpp"

namespace pegnn {

struct TrainConfig {
  std::size_t k = 5;
  std::size_t n_batch = 1024;
  std::size_t tsteps = 1500;
  double lr = 1e-3;
  double lambda = 0.0;
  bool learned_loss_weights = false;
  std::uint64_t seed = 42;
  Backbone backbone = Backbone::kGcn;
  bool use_pe = true;
  std::size_t emb_dim = 64;
  double sigma_min = 0.01;
  double sigma_max = 1.0;
  std::size_t num_scales = 16;
  double dropout = 0.1;
  std::size_t hidden_dim = 64;
  EdgeWeighting edge_weighting = EdgeWeighting::kBinary;

  void validate() const {
    check(k >= 1, "k must be >= 1");
    check(n_batch >= k + 1, "n_batch must be >= k+1");
    check(tsteps >= 1, "tsteps must be >= 1");
    check(lr > 0.0, "lr must be positive");
    model_config(0).validate();
  }

  ModelConfig model_config(std::size_t feature_dim) const {
    ModelConfig m;
    m.backbone = backbone;
    m.use_pe = use_pe;
    m.feature_dim = feature_dim;
    m.emb_dim = emb_dim;
    m.hidden_dim = hidden_dim;
    m.dropout_p = dropout;
    m.st = SinusoidalConfig{sigma_min, sigma_max, num_scales};
    m.edge_weighting = edge_weighting;
    m.loss_mode = learned_loss_weights ? LossWeightMode::kLearned : LossWeightMode::kFixed;
    m.lambda = lambda;
    return m;
  }
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  double main_loss = 0.0;
  double aux_loss = 0.0;
  double total_loss = 0.0;
  std::optional<double> sigma_main;
  std::optional<double> sigma_aux;
  double wall_ms = 0.0;
};

struct EvalMetrics {
  double mse = 0.0;
  double mae = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> steps;
  std::optional<EvalMetrics> final_metrics;

  // Mean total loss over the `window` steps ending at `at_step` (1-based).
  double trailing_mean_total(std::size_t at_step, std::size_t window = 100) const {
    check(at_step >= 1 && at_step <= steps.size(), "trailing_mean_total: bad step");
    const std::size_t lo = at_step > window ? at_step - window : 0;
    double s = 0.0;
    for (std::size_t i = lo; i < at_step; ++i) s += steps[i].total_loss;
    return s / static_cast<double>(at_step - lo);
  }
};

// Uniform sample of min(n_batch, n) distinct indices; the whole (shuffled)
// index set when n_batch covers it. Each call is an independent draw.
inline std::vector<std::size_t> sample_minibatch(std::size_t train_size,
                                                 std::size_t n_batch,
                                                 std::mt19937_64& rng) {
  check(train_size > 0, "sample_minibatch: empty training set");
  const std::size_t m = std::min(n_batch, train_size);
  std::vector<std::size_t> idx(train_size);
  for (std::size_t i = 0; i < train_size; ++i) idx[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, train_size - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  return idx;
}

namespace detail {

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
}

struct BatchView {
  std::vector<LonLat> coords_raw;
  Matrix coords_norm;
  Matrix features;
  std::vector<double> targets;
};

inline BatchView gather_batch(const Dataset& ds, const std::vector<std::size_t>& idx) {
  BatchView b;
  const std::size_t m = idx.size();
  const std::size_t p = ds.feature_dim();
  b.coords_raw.reserve(m);
  b.coords_norm = Matrix(m, 2);
  b.features = Matrix(m, p);
  b.targets.resize(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = idx[r];
    b.coords_raw.push_back(ds.points[i].coords);
    b.coords_norm.at(r, 0) = ds.coords_norm.at(i, 0);
    b.coords_norm.at(r, 1) = ds.coords_norm.at(i, 1);
    for (std::size_t f = 0; f < p; ++f) b.features.at(r, f) = ds.features_norm.at(i, f);
    b.targets[r] = ds.target_norm[i];
  }
  return b;
}

inline Tensor column(const std::vector<double>& v) {
  return Tensor::from({v.size(), 1}, std::vector<double>(v));
}

}  // namespace detail

struct TrainResult {
  PeGnnModel model;
  TrainReport report;
};

// One training run: per step, sample a minibatch, build its kNN graph from
// raw coordinates, compute the batch's (shuffled) Moran targets, run the
// two-headed forward pass, and take one Adam step on the chosen objective.
// Fully deterministic for a fixed config+seed. A non-finite loss aborts
// with the step index and loss components rather than training through the
// divergence.
inline TrainResult train(const Dataset& train_set, const TrainConfig& cfg) {
  cfg.validate();
  check(train_set.normalized(), "train: dataset must be normalized first");
  check(train_set.size() >= cfg.k + 1,
        "train: need at least k+1 points, got " + std::to_string(train_set.size()));

  std::mt19937_64 init_rng = detail::stream_rng(cfg.seed, 0);
  std::mt19937_64 batch_rng = detail::stream_rng(cfg.seed, 1);
  std::mt19937_64 dropout_rng = detail::stream_rng(cfg.seed, 2);

  TrainResult result;
  result.model = PeGnnModel(cfg.model_config(train_set.feature_dim()), init_rng);
  PeGnnModel& model = result.model;

  std::vector<Tensor> params = model.parameters();
  AdamState opt(params, AdamConfig{cfg.lr});

  for (std::size_t step = 1; step <= cfg.tsteps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();

    const std::vector<std::size_t> idx =
        sample_minibatch(train_set.size(), cfg.n_batch, batch_rng);
    detail::BatchView batch = detail::gather_batch(train_set, idx);

    SpatialGraph graph = knn_graph(batch.coords_raw, cfg.k, cfg.edge_weighting);
    const std::vector<double> moran = batch_moran_target(batch.targets, graph);

    for (Tensor& p : params) p.zero_grad();
    Tape tape;
    ForwardOutput out = model.forward(tape, batch.features, batch.coords_norm, graph,
                                      /*training=*/true, &dropout_rng);
    const Tensor y = detail::column(batch.targets);
    const Tensor moran_t = detail::column(moran);
    const LossBreakdown loss =
        model.loss_weights().mode == LossWeightMode::kFixed
            ? combined_loss(tape, out.y_hat, y, out.aux_hat, moran_t,
                            model.loss_weights())
            : uncertainty_loss(tape, out.y_hat, y, out.aux_hat, moran_t,
                               model.loss_weights());

    if (!std::isfinite(loss.total.item())) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << ": main=" << loss.main_mse
          << " aux=" << loss.aux_mse << " total=" << loss.total.item();
      throw NumericError(msg.str());
    }

    tape.backward(loss.total);
    opt.step();

    StepRecord rec;
    rec.step = step;
    rec.main_loss = loss.main_mse;
    rec.aux_loss = loss.aux_mse;
    rec.total_loss = loss.total.item();
    if (model.loss_weights().mode == LossWeightMode::kLearned) {
      rec.sigma_main = model.loss_weights().sigma_main();
      rec.sigma_aux = model.loss_weights().sigma_aux();
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.report.steps.push_back(rec);
  }
  return result;
}

// Scores the main head on a held-out set, with the graph built over the test
// points only (test points never see training neighbors). Dropout off; the
// model is not mutated.
inline EvalMetrics evaluate(const PeGnnModel& model, const Dataset& test_set,
                            std::size_t k) {
  check(test_set.size() >= 2, "evaluate: need at least 2 test points for a graph");
  check(test_set.normalized(), "evaluate: dataset must be normalized first");

  std::vector<std::size_t> all(test_set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  detail::BatchView batch = detail::gather_batch(test_set, all);

  SpatialGraph graph = knn_graph(batch.coords_raw, k, model.config().edge_weighting);
  Tape tape;
  ForwardOutput out =
      model.forward(tape, batch.features, batch.coords_norm, graph, /*training=*/false);

  EvalMetrics m;
  const std::vector<double>& pred = out.y_hat.values();
  for (std::size_t i = 0; i < batch.targets.size(); ++i) {
    const double err = pred[i] - batch.targets[i];
    m.mse += err * err;
    m.mae += std::abs(err);
  }
  m.mse /= static_cast<double>(batch.targets.size());
  m.mae /= static_cast<double>(batch.targets.size());
  return m;
}

// `step,main_loss,aux_loss,total_loss,sigma_main,sigma_aux`; the sigma
// columns stay empty for fixed-lambda runs.
inline void write_report_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "cannot open report file for writing: " + path);
  out << "step,main_loss,aux_loss,total_loss,sigma_main,sigma_aux\n";
  out.precision(17);
  for (const StepRecord& r : report.steps) {
    out << r.step << "," << r.main_loss << "," << r.aux_loss << "," << r.total_loss
        << ",";
    if (r.sigma_main) out << *r.sigma_main;
    out << ",";
    if (r.sigma_aux) out << *r.sigma_aux;
    out << "\n";
  }
  check(out.good(), "write failed: " + path);
}

}  // namespace pegnn
