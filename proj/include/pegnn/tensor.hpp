#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pegnn/error.hpp"
#include "pegnn/sparse.hpp"

namespace pegnn {

namespace detail {

struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first needed; same length as values
  bool requires_grad = false;

  std::size_t size() const { return values.size(); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

inline std::size_t shape_numel(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

}  // namespace detail

// Dense f64 tensor with an optional gradient slot. Handle semantics: copies
// share the underlying storage, which is what the tape's backward closures
// rely on. Values are written once by the op that creates the tensor and
// afterwards only mutated by the optimizer (or a gradient checker).
class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::TensorNode>()) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->values.assign(detail::shape_numel(t.node_->shape), 0.0);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false) {
    check(detail::shape_numel(shape) == values.size(),
          "tensor shape " + detail::shape_str(shape) + " does not match " +
              std::to_string(values.size()) + " values");
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->size(); }

  // Row/column view of the leading two dimensions; vectors count as one row.
  std::size_t rows() const {
    return node_->shape.size() >= 2 ? node_->shape[0] : 1;
  }
  std::size_t cols() const {
    return node_->shape.size() >= 2 ? node_->shape[1]
                                    : (node_->shape.empty() ? 0 : node_->shape[0]);
  }

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& values_mut() { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->values.size(); }
  const std::vector<double>& grad() const {
    check(has_grad(), "tensor has no gradient buffer");
    return node_->grad;
  }
  void zero_grad() {
    node_->ensure_grad();
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  double item() const {
    check(size() == 1, "item() called on tensor of size " + std::to_string(size()));
    return node_->values[0];
  }

  bool all_finite() const {
    for (double v : node_->values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

enum class Activation { kRelu, kSigmoid };

// Reverse-mode computation tape. Primitive ops append a backward closure in
// execution order; one reverse sweep over the records accumulates d loss /
// d tensor into every requires_grad tensor reachable from the loss.
// Gradients accumulate across backward() calls until the tensors are reset.
class Tape {
 public:
  Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.shape().size() == 2 && b.shape().size() == 2,
          "matmul expects rank-2 tensors, got " + detail::shape_str(a.shape()) +
              " and " + detail::shape_str(b.shape()));
    check(a.cols() == b.rows(),
          "matmul inner dimensions disagree: " + detail::shape_str(a.shape()) +
              " * " + detail::shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros({m, n}, a.requires_grad() || b.requires_grad());
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = out.values_mut().data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = pa[i * k + kk];
        const double* brow = pb + kk * n;
        double* crow = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    if (out.requires_grad()) {
      auto an = a.node(), bn = b.node(), on = out.node();
      record(out, [an, bn, on, m, k, n] {
        if (on->grad.empty()) return;
        const double* g = on->grad.data();
        if (an->requires_grad) {
          an->ensure_grad();
          // dA = G * B^T, accumulated as rank-1 row updates over B^T
          std::vector<double> bt(n * k);
          for (std::size_t kk = 0; kk < k; ++kk)
            for (std::size_t j = 0; j < n; ++j)
              bt[j * k + kk] = bn->values[kk * n + j];
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const double gv = g[i * n + j];
              const double* btrow = bt.data() + j * k;
              double* arow = an->grad.data() + i * k;
              for (std::size_t kk = 0; kk < k; ++kk) arow[kk] += gv * btrow[kk];
            }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          // dB = A^T * G
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              const double av = an->values[i * k + kk];
              const double* grow = g + i * n;
              double* brow = bn->grad.data() + kk * n;
              for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
            }
        }
      });
    }
    return out;
  }

  // s is a constant propagation matrix; gradients flow only into h.
  Tensor spmm(const SparseMatrix& s, const Tensor& h) {
    check(h.shape().size() == 2, "spmm expects a rank-2 dense operand");
    check(s.cols == h.rows(),
          "spmm dimensions disagree: sparse (" + std::to_string(s.rows) + "x" +
              std::to_string(s.cols) + ") * dense " + detail::shape_str(h.shape()));
    const std::size_t d = h.cols();
    Tensor out = Tensor::zeros({s.rows, d}, h.requires_grad());
    spmm_apply(s, h.values().data(), out.values_mut().data(), d);
    if (out.requires_grad()) {
      auto hn = h.node(), on = out.node();
      auto sp = std::make_shared<SparseMatrix>(s);
      record(out, [hn, on, sp, d] {
        if (on->grad.empty()) return;
        hn->ensure_grad();
        spmm_apply_transposed(*sp, on->grad.data(), hn->grad.data(), d);
      });
    }
    return out;
  }

  Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(a, b, "add",
                              [](double x, double y) { return x + y; },
                              /*da=*/1.0, /*db=*/1.0);
  }

  Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(a, b, "sub",
                              [](double x, double y) { return x - y; },
                              /*da=*/1.0, /*db=*/-1.0);
  }

  Tensor mul(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(),
          "mul shapes disagree: " + detail::shape_str(a.shape()) + " vs " +
              detail::shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i)
      out.values_mut()[i] = a.values()[i] * b.values()[i];
    if (out.requires_grad()) {
      auto an = a.node(), bn = b.node(), on = out.node();
      record(out, [an, bn, on] {
        if (on->grad.empty()) return;
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < on->grad.size(); ++i)
            an->grad[i] += on->grad[i] * bn->values[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < on->grad.size(); ++i)
            bn->grad[i] += on->grad[i] * an->values[i];
        }
      });
    }
    return out;
  }

  // (n x d) + (d): the bias row is added to every row.
  Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    check(x.shape().size() == 2 && bias.size() == x.cols(),
          "add_row_bias shapes disagree: " + detail::shape_str(x.shape()) +
              " + " + detail::shape_str(bias.shape()));
    const std::size_t n = x.rows(), d = x.cols();
    Tensor out = Tensor::zeros({n, d}, x.requires_grad() || bias.requires_grad());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out.values_mut()[i * d + j] = x.values()[i * d + j] + bias.values()[j];
    if (out.requires_grad()) {
      auto xn = x.node(), bn = bias.node(), on = out.node();
      record(out, [xn, bn, on, n, d] {
        if (on->grad.empty()) return;
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (std::size_t i = 0; i < n * d; ++i) xn->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) bn->grad[j] += on->grad[i * d + j];
        }
      });
    }
    return out;
  }

  Tensor scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.values_mut()[i] = c * a.values()[i];
    if (out.requires_grad()) {
      auto an = a.node(), on = out.node();
      record(out, [an, on, c] {
        if (on->grad.empty()) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          an->grad[i] += c * on->grad[i];
      });
    }
    return out;
  }

  Tensor add_const(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.values_mut()[i] = a.values()[i] + c;
    if (out.requires_grad()) {
      auto an = a.node(), on = out.node();
      record(out, [an, on] {
        if (on->grad.empty()) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
      });
    }
    return out;
  }

  Tensor exp(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i)
      out.values_mut()[i] = std::exp(a.values()[i]);
    if (out.requires_grad()) {
      auto an = a.node(), on = out.node();
      record(out, [an, on] {
        if (on->grad.empty()) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          an->grad[i] += on->grad[i] * on->values[i];
      });
    }
    return out;
  }

  Tensor sin(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i)
      out.values_mut()[i] = std::sin(a.values()[i]);
    if (out.requires_grad()) {
      auto an = a.node(), on = out.node();
      record(out, [an, on] {
        if (on->grad.empty()) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          an->grad[i] += on->grad[i] * std::cos(an->values[i]);
      });
    }
    return out;
  }

  Tensor activation(const Tensor& x, Activation kind) {
    return kind == Activation::kRelu ? relu(x) : sigmoid(x);
  }

  Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < x.size(); ++i)
      out.values_mut()[i] = x.values()[i] > 0.0 ? x.values()[i] : 0.0;
    if (out.requires_grad()) {
      auto xn = x.node(), on = out.node();
      record(out, [xn, on] {
        if (on->grad.empty()) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          if (xn->values[i] > 0.0) xn->grad[i] += on->grad[i];
      });
    }
    return out;
  }

  Tensor sigmoid(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x.values()[i];
      // Split by sign so neither branch exponentiates a large positive value.
      out.values_mut()[i] =
          v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                   : std::exp(v) / (1.0 + std::exp(v));
    }
    if (out.requires_grad()) {
      auto xn = x.node(), on = out.node();
      record(out, [xn, on] {
        if (on->grad.empty()) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) {
          const double y = on->values[i];
          xn->grad[i] += on->grad[i] * y * (1.0 - y);
        }
      });
    }
    return out;
  }

  // Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
  // Eval mode and p == 0 are identities and do not consume the RNG.
  Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng) {
    check(p >= 0.0 && p < 1.0,
          "dropout probability must lie in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - p);
    auto mask = std::make_shared<std::vector<double>>(x.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i)
      (*mask)[i] = unit(rng) < p ? 0.0 : keep_scale;
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < x.size(); ++i)
      out.values_mut()[i] = x.values()[i] * (*mask)[i];
    if (out.requires_grad()) {
      auto xn = x.node(), on = out.node();
      record(out, [xn, on, mask] {
        if (on->grad.empty()) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          xn->grad[i] += on->grad[i] * (*mask)[i];
      });
    }
    return out;
  }

  Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check(a.shape().size() == 2 && b.shape().size() == 2,
          "concat_cols expects rank-2 tensors");
    check(a.rows() == b.rows(),
          "concat_cols row counts disagree: " + detail::shape_str(a.shape()) +
              " vs " + detail::shape_str(b.shape()));
    const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
    Tensor out = Tensor::zeros({n, p + q}, a.requires_grad() || b.requires_grad());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j)
        out.values_mut()[i * (p + q) + j] = a.values()[i * p + j];
      for (std::size_t j = 0; j < q; ++j)
        out.values_mut()[i * (p + q) + p + j] = b.values()[i * q + j];
    }
    if (out.requires_grad()) {
      auto an = a.node(), bn = b.node(), on = out.node();
      record(out, [an, bn, on, n, p, q] {
        if (on->grad.empty()) return;
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j)
              an->grad[i * p + j] += on->grad[i * (p + q) + j];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < q; ++j)
              bn->grad[i * q + j] += on->grad[i * (p + q) + p + j];
        }
      });
    }
    return out;
  }

  Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    Tensor out = Tensor::from({1}, {s}, a.requires_grad());
    if (out.requires_grad()) {
      auto an = a.node(), on = out.node();
      record(out, [an, on] {
        if (on->grad.empty()) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
      });
    }
    return out;
  }

  Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    check(pred.size() > 0, "mse_loss on empty input");
    check(pred.size() == target.size(),
          "mse_loss lengths disagree: " + std::to_string(pred.size()) + " vs " +
              std::to_string(target.size()));
    const std::size_t n = pred.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pred.values()[i] - target.values()[i];
      s += d * d;
    }
    Tensor out = Tensor::from({1}, {s / static_cast<double>(n)},
                              pred.requires_grad() || target.requires_grad());
    if (out.requires_grad()) {
      auto pn = pred.node(), tn = target.node(), on = out.node();
      record(out, [pn, tn, on, n] {
        if (on->grad.empty()) return;
        const double g = on->grad[0] * 2.0 / static_cast<double>(n);
        if (pn->requires_grad) {
          pn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            pn->grad[i] += g * (pn->values[i] - tn->values[i]);
        }
        if (tn->requires_grad) {
          tn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            tn->grad[i] -= g * (pn->values[i] - tn->values[i]);
        }
      });
    }
    return out;
  }

  // Seeds d loss/d loss = 1 and replays the records in reverse. Gradients of
  // op outputs are rebuilt from scratch on every sweep; leaf gradients only
  // ever receive +=, so repeated calls without a reset accumulate there.
  void backward(const Tensor& loss) {
    check(loss.size() == 1, "backward requires a scalar loss, got " +
                                detail::shape_str(loss.shape()));
    for (const Record& r : records_) {
      r.output->ensure_grad();
      std::fill(r.output->grad.begin(), r.output->grad.end(), 0.0);
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->backward();
  }

  void clear() { records_.clear(); }
  std::size_t size() const { return records_.size(); }

 private:
  struct Record {
    std::function<void()> backward;
    std::shared_ptr<detail::TensorNode> output;
  };

  void record(const Tensor& output, std::function<void()> fn) {
    records_.push_back({std::move(fn), output.node()});
  }

  template <typename F>
  Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                            F&& f, double da, double db) {
    check(a.shape() == b.shape(),
          std::string(name) + " shapes disagree: " + detail::shape_str(a.shape()) +
              " vs " + detail::shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i)
      out.values_mut()[i] = f(a.values()[i], b.values()[i]);
    if (out.requires_grad()) {
      auto an = a.node(), bn = b.node(), on = out.node();
      record(out, [an, bn, on, da, db] {
        if (on->grad.empty()) return;
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < on->grad.size(); ++i)
            an->grad[i] += da * on->grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < on->grad.size(); ++i)
            bn->grad[i] += db * on->grad[i];
        }
      });
    }
    return out;
  }

  std::vector<Record> records_;
};

}  // namespace pegnn
