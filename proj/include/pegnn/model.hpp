#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pegnn/encoder.hpp"
#include "pegnn/geo.hpp"
#include "pegnn/matrix.hpp"
#include "pegnn/tensor.hpp"

namespace pegnn {

enum class Backbone { kGcn, kSage };
enum class LossWeightMode { kFixed, kLearned };

// Auxiliary-task weighting: either a fixed lambda on the Moran head's MSE,
// or per-task noise scales learned alongside the network. The learned mode
// parametrizes log sigma^2 so the optimization stays unconstrained and
// sigma^2 = exp(log_var) is positive by construction.
struct LossWeights {
  LossWeightMode mode = LossWeightMode::kFixed;
  double lambda = 0.0;
  Tensor log_var_main;
  Tensor log_var_aux;

  static LossWeights fixed(double lambda) {
    check(lambda >= 0.0 && lambda < 1.0,
          "fixed auxiliary weight must lie in [0, 1), got " + std::to_string(lambda));
    LossWeights w;
    w.mode = LossWeightMode::kFixed;
    w.lambda = lambda;
    return w;
  }

  static LossWeights learned() {
    LossWeights w;
    w.mode = LossWeightMode::kLearned;
    w.log_var_main = Tensor::zeros({1}, /*requires_grad=*/true);
    w.log_var_aux = Tensor::zeros({1}, /*requires_grad=*/true);
    return w;
  }

  double sigma_main() const { return std::exp(0.5 * log_var_main.item()); }
  double sigma_aux() const { return std::exp(0.5 * log_var_aux.item()); }
};

struct GcnLayer {
  Tensor weight;  // in x out
  Tensor bias;    // out
};

struct SageLayer {
  Tensor w_self;   // in x out
  Tensor w_neigh;  // in x out
  Tensor bias;     // out
};

namespace detail {

inline Tensor glorot_uniform(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(in * out);
  for (double& v : w) v = dist(rng);
  return Tensor::from({in, out}, std::move(w), /*requires_grad=*/true);
}

inline GcnLayer make_gcn_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {glorot_uniform(in, out, rng), Tensor::zeros({out}, true)};
}

inline SageLayer make_sage_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {glorot_uniform(in, out, rng), glorot_uniform(in, out, rng),
          Tensor::zeros({out}, true)};
}

}  // namespace detail

// One graph convolution: Abar * H * W + bias. The activation between stacked
// layers is applied by the caller, so the final layer can stay linear.
inline Tensor gcn_layer_forward(Tape& tape, const Tensor& h,
                                const SparseMatrix& norm_adj, const GcnLayer& layer) {
  return tape.add_row_bias(tape.matmul(tape.spmm(norm_adj, h), layer.weight),
                           layer.bias);
}

// GraphSAGE with mean aggregation: H * W_self + mean_{j in N(i)} H_j * W_neigh
// + bias. neighbor_mean is the row-standardized adjacency, so nodes without
// out-edges contribute a zero neighbor term.
inline Tensor sage_layer_forward(Tape& tape, const Tensor& h,
                                 const SparseMatrix& neighbor_mean,
                                 const SageLayer& layer) {
  Tensor self_term = tape.matmul(h, layer.w_self);
  Tensor neigh_term = tape.matmul(tape.spmm(neighbor_mean, h), layer.w_neigh);
  return tape.add_row_bias(tape.add(self_term, neigh_term), layer.bias);
}

struct ModelConfig {
  Backbone backbone = Backbone::kGcn;
  bool use_pe = true;
  std::size_t feature_dim = 0;
  std::size_t emb_dim = 64;
  std::size_t hidden_dim = 64;
  double dropout_p = 0.1;
  SinusoidalConfig st;
  EdgeWeighting edge_weighting = EdgeWeighting::kBinary;
  LossWeightMode loss_mode = LossWeightMode::kFixed;
  double lambda = 0.0;

  // Width of H^(0): features plus either the coordinate embedding or the two
  // raw coordinates the baseline consumes directly.
  std::size_t input_dim() const { return feature_dim + (use_pe ? emb_dim : 2); }

  void validate() const {
    st.validate();
    check(hidden_dim >= 1, "hidden_dim must be >= 1");
    check(emb_dim >= 1, "emb_dim must be >= 1");
    check(dropout_p >= 0.0 && dropout_p < 1.0, "dropout must lie in [0, 1)");
    if (loss_mode == LossWeightMode::kFixed)
      check(lambda >= 0.0 && lambda < 1.0, "lambda must lie in [0, 1)");
  }
};

struct ForwardOutput {
  Tensor y_hat;    // n x 1 main-task predictions
  Tensor aux_hat;  // n x 1 predicted local Moran's I
};

// The assembled two-headed model: positional encoder (optional), two shared
// backbone layers with ReLU and dropout between them, and linear heads for
// the outcome and its spatial autocorrelation.
class PeGnnModel {
 public:
  PeGnnModel() = default;

  PeGnnModel(const ModelConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.use_pe) encoder_.emplace(cfg_.st, cfg_.emb_dim, rng);
    const std::size_t in = cfg_.input_dim();
    if (cfg_.backbone == Backbone::kGcn) {
      gcn_.push_back(detail::make_gcn_layer(in, cfg_.hidden_dim, rng));
      gcn_.push_back(detail::make_gcn_layer(cfg_.hidden_dim, cfg_.hidden_dim, rng));
    } else {
      sage_.push_back(detail::make_sage_layer(in, cfg_.hidden_dim, rng));
      sage_.push_back(detail::make_sage_layer(cfg_.hidden_dim, cfg_.hidden_dim, rng));
    }
    head_main_w_ = detail::glorot_uniform(cfg_.hidden_dim, 1, rng);
    head_main_b_ = Tensor::zeros({1}, true);
    head_aux_w_ = detail::glorot_uniform(cfg_.hidden_dim, 1, rng);
    head_aux_b_ = Tensor::zeros({1}, true);
    weights_ = cfg_.loss_mode == LossWeightMode::kFixed
                   ? LossWeights::fixed(cfg_.lambda)
                   : LossWeights::learned();
  }

  // features may have zero columns (pure interpolation); coords are the
  // normalized n x 2 matrix feeding the encoder or, without PE, the raw
  // coordinate features of the baseline. The graph must cover exactly these
  // n points.
  ForwardOutput forward(Tape& tape, const Matrix& features, const Matrix& coords,
                        const SpatialGraph& graph, bool training,
                        std::mt19937_64* dropout_rng = nullptr) const {
    const std::size_t n = graph.n;
    check(coords.rows == n && coords.cols == 2,
          "model forward: coords must be " + std::to_string(n) + " x 2");
    check(features.rows == n || features.cols == 0,
          "model forward: feature rows disagree with graph size");
    check(features.cols == cfg_.feature_dim,
          "model forward: expected " + std::to_string(cfg_.feature_dim) +
              " features, got " + std::to_string(features.cols));
    const bool needs_rng = training && cfg_.dropout_p > 0.0;
    check(!needs_rng || dropout_rng != nullptr,
          "model forward: training with dropout requires an RNG");

    Tensor h0 = assemble_input(tape, features, coords);

    SparseMatrix prop = cfg_.backbone == Backbone::kGcn ? normalize_adjacency(graph)
                                                        : row_standardize(graph);
    Tensor h1 = cfg_.backbone == Backbone::kGcn
                    ? gcn_layer_forward(tape, h0, prop, gcn_[0])
                    : sage_layer_forward(tape, h0, prop, sage_[0]);
    Tensor a1 = tape.relu(h1);
    Tensor d1 = needs_rng ? tape.dropout(a1, cfg_.dropout_p, true, *dropout_rng) : a1;
    Tensor h2 = cfg_.backbone == Backbone::kGcn
                    ? gcn_layer_forward(tape, d1, prop, gcn_[1])
                    : sage_layer_forward(tape, d1, prop, sage_[1]);

    ForwardOutput out;
    out.y_hat = tape.add_row_bias(tape.matmul(h2, head_main_w_), head_main_b_);
    out.aux_hat = tape.add_row_bias(tape.matmul(h2, head_aux_w_), head_aux_b_);
    return out;
  }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (encoder_) {
      out.emplace_back("pe.weight", encoder_->weight());
      out.emplace_back("pe.bias", encoder_->bias());
    }
    for (std::size_t l = 0; l < gcn_.size(); ++l) {
      const std::string base = "gcn" + std::to_string(l + 1);
      out.emplace_back(base + ".weight", gcn_[l].weight);
      out.emplace_back(base + ".bias", gcn_[l].bias);
    }
    for (std::size_t l = 0; l < sage_.size(); ++l) {
      const std::string base = "sage" + std::to_string(l + 1);
      out.emplace_back(base + ".w_self", sage_[l].w_self);
      out.emplace_back(base + ".w_neigh", sage_[l].w_neigh);
      out.emplace_back(base + ".bias", sage_[l].bias);
    }
    out.emplace_back("head_main.weight", head_main_w_);
    out.emplace_back("head_main.bias", head_main_b_);
    out.emplace_back("head_aux.weight", head_aux_w_);
    out.emplace_back("head_aux.bias", head_aux_b_);
    if (weights_.mode == LossWeightMode::kLearned) {
      out.emplace_back("loss.log_var_main", weights_.log_var_main);
      out.emplace_back("loss.log_var_aux", weights_.log_var_aux);
    }
    return out;
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  const ModelConfig& config() const { return cfg_; }
  LossWeights& loss_weights() { return weights_; }
  const LossWeights& loss_weights() const { return weights_; }
  const PositionalEncoder& encoder() const {
    check(encoder_.has_value(), "model was built without a positional encoder");
    return *encoder_;
  }

 private:
  Tensor assemble_input(Tape& tape, const Matrix& features, const Matrix& coords) const {
    Tensor pos;
    if (cfg_.use_pe) {
      pos = encoder_->forward(tape, coords);
    } else {
      Matrix c = coords;
      pos = Tensor::from({c.rows, c.cols}, std::move(c.data));
    }
    if (cfg_.feature_dim == 0) return pos;
    Matrix f = features;
    Tensor x = Tensor::from({f.rows, f.cols}, std::move(f.data));
    return tape.concat_cols(x, pos);
  }

  ModelConfig cfg_;
  std::optional<PositionalEncoder> encoder_;
  std::vector<GcnLayer> gcn_;
  std::vector<SageLayer> sage_;
  Tensor head_main_w_, head_main_b_;
  Tensor head_aux_w_, head_aux_b_;
  LossWeights weights_;
};

struct LossBreakdown {
  Tensor total;
  double main_mse = 0.0;
  double aux_mse = 0.0;
};

namespace detail {

inline double plain_mse(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace detail

// L = MSE(y_hat, y) + lambda * MSE(aux_hat, aux_target). With lambda = 0 the
// auxiliary term is skipped entirely, so no gradient reaches the aux head;
// its MSE is still reported for the training log.
inline LossBreakdown combined_loss(Tape& tape, const Tensor& y_hat, const Tensor& y,
                                   const Tensor& aux_hat, const Tensor& aux_target,
                                   const LossWeights& weights) {
  check(weights.mode == LossWeightMode::kFixed,
        "combined_loss requires fixed-lambda weights");
  check(y_hat.size() == y.size() && aux_hat.size() == aux_target.size(),
        "combined_loss: prediction/target lengths disagree");
  LossBreakdown out;
  Tensor main = tape.mse_loss(y_hat, y);
  out.main_mse = main.item();
  if (weights.lambda == 0.0) {
    out.aux_mse = detail::plain_mse(aux_hat, aux_target);
    out.total = main;
  } else {
    Tensor aux = tape.mse_loss(aux_hat, aux_target);
    out.aux_mse = aux.item();
    out.total = tape.add(main, tape.scale(aux, weights.lambda));
  }
  return out;
}

// Homoscedastic-uncertainty weighting of the two tasks:
//   L = L_main / (2 sigma_main^2) + L_aux / (2 sigma_aux^2)
//       + (log sigma_main + log sigma_aux)
// with sigma^2 = exp(log_var), so the regularizer equals
// (log_var_main + log_var_aux) / 2. The log_var scalars receive gradients
// like any other parameter.
inline LossBreakdown uncertainty_loss(Tape& tape, const Tensor& y_hat, const Tensor& y,
                                      const Tensor& aux_hat, const Tensor& aux_target,
                                      const LossWeights& weights) {
  check(weights.mode == LossWeightMode::kLearned,
        "uncertainty_loss requires learned weights");
  check(y_hat.size() == y.size() && aux_hat.size() == aux_target.size(),
        "uncertainty_loss: prediction/target lengths disagree");
  LossBreakdown out;
  Tensor main = tape.mse_loss(y_hat, y);
  Tensor aux = tape.mse_loss(aux_hat, aux_target);
  out.main_mse = main.item();
  out.aux_mse = aux.item();
  Tensor main_term =
      tape.scale(tape.mul(main, tape.exp(tape.scale(weights.log_var_main, -1.0))), 0.5);
  Tensor aux_term =
      tape.scale(tape.mul(aux, tape.exp(tape.scale(weights.log_var_aux, -1.0))), 0.5);
  Tensor reg = tape.scale(tape.add(weights.log_var_main, weights.log_var_aux), 0.5);
  out.total = tape.add(tape.add(main_term, aux_term), reg);
  return out;
}

}  // namespace pegnn
