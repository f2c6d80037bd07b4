#pragma once

#include <bit>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "cslt/types.hpp"

namespace cslt {

// Reverse-mode autodiff over dense row-major matrices. Graphs are built per
// forward pass and freed with the loss variable; parameters are long-lived
// leaf nodes whose grads accumulate across items until the optimizer clears
// them. Single writer per graph; parameter leaves must not be shared across
// concurrently built graphs.

inline float bf16_round(float x) {
  uint32_t bits = std::bit_cast<uint32_t>(x);
  uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7fffu + lsb;
  bits &= 0xffff0000u;
  return std::bit_cast<float>(bits);
}

template <typename S>
struct TapeNode {
  Mat<S> val;
  Mat<S> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TapeNode<S>>> parents;
  std::function<void(TapeNode<S>&)> backprop;

  void ensure_grad() {
    if (grad.rows() != val.rows() || grad.cols() != val.cols())
      grad = Mat<S>::Zero(val.rows(), val.cols());
  }
};

template <typename S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<TapeNode<S>> n) : node_(std::move(n)) {}

  static Var constant(Mat<S> value) {
    auto n = std::make_shared<TapeNode<S>>();
    n->val = std::move(value);
    return Var(std::move(n));
  }

  static Var leaf(Mat<S> value) {
    auto n = std::make_shared<TapeNode<S>>();
    n->val = std::move(value);
    n->requires_grad = true;
    n->ensure_grad();
    return Var(std::move(n));
  }

  const Mat<S>& val() const { return node_->val; }
  Mat<S>& val() { return node_->val; }
  const Mat<S>& grad() const { return node_->grad; }
  Mat<S>& grad() { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::shared_ptr<TapeNode<S>> node() const { return node_; }
  bool valid() const { return node_ != nullptr; }

  void zero_grad() {
    if (node_) node_->grad.setZero();
  }

  // Backward from a 1x1 loss.
  void backward() const {
    if (node_->val.size() != 1) throw std::logic_error("backward() expects a scalar node");
    std::vector<TapeNode<S>*> order;
    std::unordered_set<TapeNode<S>*> seen;
    std::vector<std::pair<TapeNode<S>*, size_t>> stack;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        TapeNode<S>* p = n->parents[idx++].get();
        if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    for (auto* n : order)
      if (n != node_.get()) n->ensure_grad();
    node_->ensure_grad();
    node_->grad(0, 0) = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backprop) (*it)->backprop(**it);
  }

 private:
  std::shared_ptr<TapeNode<S>> node_;
};

namespace detail {

template <typename S>
std::shared_ptr<TapeNode<S>> make_op(Mat<S> value, std::vector<std::shared_ptr<TapeNode<S>>> parents,
                                     std::function<void(TapeNode<S>&)> backprop) {
  auto n = std::make_shared<TapeNode<S>>();
  n->val = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ops

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  auto an = a.node(), bn = b.node();
  Mat<S> out = an->val * bn->val;
  return Var<S>(detail::make_op<S>(std::move(out), {an, bn}, [an, bn](TapeNode<S>& n) {
    if (an->requires_grad) an->grad.noalias() += n.grad * bn->val.transpose();
    if (bn->requires_grad) bn->grad.noalias() += an->val.transpose() * n.grad;
  }));
}

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  auto an = a.node(), bn = b.node();
  Mat<S> out = an->val + bn->val;
  return Var<S>(detail::make_op<S>(std::move(out), {an, bn}, [an, bn](TapeNode<S>& n) {
    if (an->requires_grad) an->grad += n.grad;
    if (bn->requires_grad) bn->grad += n.grad;
  }));
}

// bias (1 x n) broadcast over every row of a
template <typename S>
Var<S> add_rowvec(const Var<S>& a, const Var<S>& bias) {
  auto an = a.node(), bn = bias.node();
  Mat<S> out = an->val.rowwise() + bn->val.row(0);
  return Var<S>(detail::make_op<S>(std::move(out), {an, bn}, [an, bn](TapeNode<S>& n) {
    if (an->requires_grad) an->grad += n.grad;
    if (bn->requires_grad) bn->grad.row(0) += n.grad.colwise().sum();
  }));
}

template <typename S>
Var<S> scale(const Var<S>& a, S k) {
  auto an = a.node();
  Mat<S> out = an->val * k;
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an, k](TapeNode<S>& n) {
    if (an->requires_grad) an->grad += n.grad * k;
  }));
}

// elementwise product with a constant mask (dropout etc.)
template <typename S>
Var<S> mul_mask(const Var<S>& a, const Mat<S>& mask) {
  auto an = a.node();
  Mat<S> out = an->val.cwiseProduct(mask);
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an, mask](TapeNode<S>& n) {
    if (an->requires_grad) an->grad += n.grad.cwiseProduct(mask);
  }));
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  auto an = a.node();
  Mat<S> out = an->val.cwiseMax(S(0));
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an](TapeNode<S>& n) {
    if (!an->requires_grad) return;
    an->grad += n.grad.cwiseProduct(
        (an->val.array() > S(0)).template cast<S>().matrix());
  }));
}

// Exact GELU: x * Phi(x)
template <typename S>
Var<S> gelu(const Var<S>& a) {
  auto an = a.node();
  const S inv_sqrt2 = S(1) / std::sqrt(S(2));
  Mat<S> cdf = an->val.unaryExpr(
      [inv_sqrt2](S x) { return S(0.5) * (S(1) + std::erf(x * inv_sqrt2)); });
  Mat<S> out = an->val.cwiseProduct(cdf);
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an, cdf](TapeNode<S>& n) {
    if (!an->requires_grad) return;
    const S inv_sqrt_2pi = S(1) / std::sqrt(S(2) * S(M_PI));
    Mat<S> pdf = (-an->val.array().square() * S(0.5)).exp() * inv_sqrt_2pi;
    an->grad += n.grad.cwiseProduct(cdf + an->val.cwiseProduct(pdf));
  }));
}

// Row-wise layer norm with learned gain/bias (1 x n each).
template <typename S>
Var<S> layernorm(const Var<S>& a, const Var<S>& gamma, const Var<S>& beta, S eps = S(1e-5)) {
  auto an = a.node(), gn = gamma.node(), bn = beta.node();
  const auto rows = an->val.rows();
  const auto n_cols = an->val.cols();
  Mat<S> xhat(rows, n_cols);
  Mat<S> inv_sigma(rows, 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    S mu = an->val.row(r).mean();
    S var = (an->val.row(r).array() - mu).square().mean();
    S is = S(1) / std::sqrt(var + eps);
    inv_sigma(r, 0) = is;
    xhat.row(r) = (an->val.row(r).array() - mu) * is;
  }
  Mat<S> out = (xhat.array().rowwise() * gn->val.row(0).array()).rowwise() +
               bn->val.row(0).array();
  return Var<S>(detail::make_op<S>(std::move(out), {an, gn, bn},
                                   [an, gn, bn, xhat, inv_sigma](TapeNode<S>& n) {
    const auto rows = n.grad.rows();
    const auto n_cols = n.grad.cols();
    if (gn->requires_grad)
      gn->grad.row(0) += n.grad.cwiseProduct(xhat).colwise().sum();
    if (bn->requires_grad) bn->grad.row(0) += n.grad.colwise().sum();
    if (an->requires_grad) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::Array<S, 1, Eigen::Dynamic> g =
            n.grad.row(r).array() * gn->val.row(0).array();
        S mean_g = g.mean();
        S mean_gx = (g * xhat.row(r).array()).mean();
        an->grad.row(r).array() +=
            (g - mean_g - xhat.row(r).array() * mean_gx) * inv_sigma(r, 0);
      }
      (void)n_cols;
    }
  }));
}

// Row-wise softmax with causal masking: entry (i, j) participates iff
// j <= i + offset. offset = key_len - query_len for incremental decoding.
template <typename S>
Var<S> causal_softmax(const Var<S>& scores, Eigen::Index offset) {
  auto an = scores.node();
  const auto rows = an->val.rows();
  const auto cols = an->val.cols();
  Mat<S> p = Mat<S>::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    Eigen::Index limit = std::min(cols, i + offset + 1);
    if (limit <= 0) throw std::logic_error("causal_softmax: fully masked row");
    S m = an->val.row(i).head(limit).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e =
        (an->val.row(i).head(limit).array() - m).exp();
    p.row(i).head(limit) = e / e.sum();
  }
  return Var<S>(detail::make_op<S>(std::move(p), {an}, [an, offset](TapeNode<S>& n) {
    if (!an->requires_grad) return;
    const auto rows = n.val.rows();
    const auto cols = n.val.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Index limit = std::min(cols, i + offset + 1);
      auto pr = n.val.row(i).head(limit).array();
      auto gr = n.grad.row(i).head(limit).array();
      S dot = (pr * gr).sum();
      an->grad.row(i).head(limit).array() += pr * (gr - dot);
    }
  }));
}

template <typename S>
Var<S> transpose(const Var<S>& a) {
  auto an = a.node();
  Mat<S> out = an->val.transpose();
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an](TapeNode<S>& n) {
    if (an->requires_grad) an->grad += n.grad.transpose();
  }));
}

template <typename S>
Var<S> cols(const Var<S>& a, Eigen::Index start, Eigen::Index n_cols) {
  auto an = a.node();
  Mat<S> out = an->val.middleCols(start, n_cols);
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an, start, n_cols](TapeNode<S>& n) {
    if (an->requires_grad) an->grad.middleCols(start, n_cols) += n.grad;
  }));
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  Eigen::Index rows = parts.front().val().rows(), total = 0;
  std::vector<std::shared_ptr<TapeNode<S>>> nodes;
  for (const auto& p : parts) {
    total += p.val().cols();
    nodes.push_back(p.node());
  }
  Mat<S> out(rows, total);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.val().cols()) = p.val();
    c += p.val().cols();
  }
  return Var<S>(detail::make_op<S>(std::move(out), nodes, [nodes](TapeNode<S>& n) {
    Eigen::Index c = 0;
    for (const auto& p : nodes) {
      if (p->requires_grad) p->grad += n.grad.middleCols(c, p->val.cols());
      c += p->val.cols();
    }
  }));
}

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  Eigen::Index cols_n = parts.front().val().cols(), total = 0;
  std::vector<std::shared_ptr<TapeNode<S>>> nodes;
  for (const auto& p : parts) {
    total += p.val().rows();
    nodes.push_back(p.node());
  }
  Mat<S> out(total, cols_n);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.val().rows()) = p.val();
    r += p.val().rows();
  }
  return Var<S>(detail::make_op<S>(std::move(out), nodes, [nodes](TapeNode<S>& n) {
    Eigen::Index r = 0;
    for (const auto& p : nodes) {
      if (p->requires_grad) p->grad += n.grad.middleRows(r, p->val.rows());
      r += p->val.rows();
    }
  }));
}

// Embedding lookup: one output row per index.
template <typename S>
Var<S> gather_rows(const Var<S>& table, std::vector<int> indices) {
  auto tn = table.node();
  Mat<S> out(static_cast<Eigen::Index>(indices.size()), tn->val.cols());
  for (size_t i = 0; i < indices.size(); ++i) out.row(i) = tn->val.row(indices[i]);
  return Var<S>(detail::make_op<S>(std::move(out), {tn},
                                   [tn, idx = std::move(indices)](TapeNode<S>& n) {
    if (!tn->requires_grad) return;
    for (size_t i = 0; i < idx.size(); ++i)
      tn->grad.row(idx[i]) += n.grad.row(i);
  }));
}

// Temporal im2col for 1-D convolution over rows: output row t concatenates
// input rows t-pad .. t-pad+k-1 (zero outside), so conv = im2col * W.
template <typename S>
Var<S> im2col_rows(const Var<S>& a, int kernel, int pad) {
  auto an = a.node();
  const Eigen::Index t_len = an->val.rows(), c = an->val.cols();
  Mat<S> out = Mat<S>::Zero(t_len, kernel * c);
  for (Eigen::Index t = 0; t < t_len; ++t)
    for (int k = 0; k < kernel; ++k) {
      Eigen::Index src = t - pad + k;
      if (src >= 0 && src < t_len) out.row(t).segment(k * c, c) = an->val.row(src);
    }
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an, kernel, pad](TapeNode<S>& n) {
    if (!an->requires_grad) return;
    const Eigen::Index t_len = an->val.rows(), c = an->val.cols();
    for (Eigen::Index t = 0; t < t_len; ++t)
      for (int k = 0; k < kernel; ++k) {
        Eigen::Index src = t - pad + k;
        if (src >= 0 && src < t_len)
          an->grad.row(src) += n.grad.row(t).segment(k * c, c);
      }
  }));
}

// Max pooling over rows (time), per column. Ties resolve to the earliest row.
template <typename S>
Var<S> maxpool_rows(const Var<S>& a, int kernel, int stride) {
  auto an = a.node();
  const Eigen::Index t_len = an->val.rows(), c = an->val.cols();
  const Eigen::Index t_out = (t_len - kernel) / stride + 1;
  if (t_out < 1) throw DataError("maxpool_rows: sequence shorter than kernel");
  Mat<S> out(t_out, c);
  auto argmax = std::make_shared<std::vector<Eigen::Index>>(t_out * c);
  for (Eigen::Index o = 0; o < t_out; ++o)
    for (Eigen::Index j = 0; j < c; ++j) {
      Eigen::Index best = o * stride;
      S best_v = an->val(best, j);
      for (int k = 1; k < kernel; ++k) {
        S v = an->val(o * stride + k, j);
        if (v > best_v) {
          best_v = v;
          best = o * stride + k;
        }
      }
      out(o, j) = best_v;
      (*argmax)[o * c + j] = best;
    }
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an, argmax, c](TapeNode<S>& n) {
    if (!an->requires_grad) return;
    for (Eigen::Index o = 0; o < n.val.rows(); ++o)
      for (Eigen::Index j = 0; j < c; ++j)
        an->grad((*argmax)[o * c + j], j) += n.grad(o, j);
  }));
}

// Mean next-token cross-entropy over the positions where mask is true.
// logits: T x V; targets/mask sized T.
template <typename S>
Var<S> cross_entropy_masked(const Var<S>& logits, const std::vector<int>& targets,
                            const std::vector<char>& mask) {
  auto ln = logits.node();
  const Eigen::Index t_len = ln->val.rows();
  Eigen::Index n_masked = 0;
  for (Eigen::Index t = 0; t < t_len; ++t)
    if (mask[t]) ++n_masked;
  if (n_masked == 0) throw DataError("cross_entropy_masked: no supervised positions");

  S total = S(0);
  auto probs = std::make_shared<Mat<S>>(Mat<S>::Zero(t_len, ln->val.cols()));
  for (Eigen::Index t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    S m = ln->val.row(t).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (ln->val.row(t).array() - m).exp();
    S z = e.sum();
    probs->row(t) = e / z;
    total += std::log(z) + m - ln->val(t, targets[t]);
  }
  Mat<S> out(1, 1);
  out(0, 0) = total / S(n_masked);
  return Var<S>(detail::make_op<S>(std::move(out), {ln},
                                   [ln, probs, targets, mask, n_masked](TapeNode<S>& n) {
    if (!ln->requires_grad) return;
    const S g = n.grad(0, 0) / S(n_masked);
    for (Eigen::Index t = 0; t < ln->val.rows(); ++t) {
      if (!mask[t]) continue;
      ln->grad.row(t) += probs->row(t) * g;
      ln->grad(t, targets[t]) -= g;
    }
  }));
}

// Straight-through bfloat16 rounding of parameter values (used to emulate
// bf16 weights over fp32 masters; gradients pass through unchanged).
template <typename S>
Var<S> bf16_cast(const Var<S>& a) {
  auto an = a.node();
  Mat<S> out = an->val.unaryExpr([](S x) { return S(bf16_round(static_cast<float>(x))); });
  return Var<S>(detail::make_op<S>(std::move(out), {an}, [an](TapeNode<S>& n) {
    if (an->requires_grad) an->grad += n.grad;
  }));
}

}  // namespace cslt
