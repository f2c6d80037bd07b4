#pragma once

#include <memory>

#include "cslt/autograd.hpp"

namespace cslt {

template <typename S>
struct Param {
  std::string name;
  Var<S> var;
  bool trainable = true;

  Mat<S>& value() { return var.val(); }
  const Mat<S>& value() const { return var.val(); }
  Mat<S>& grad() { return var.grad(); }
};

template <typename S>
using ParamPtr = std::shared_ptr<Param<S>>;

// Initialization conventions: fan-in scaled gaussians for linear maps,
// small gaussians for embeddings, zeros for biases.
template <typename S>
ParamPtr<S> make_linear_param(const std::string& name, int in, int out, Rng& rng) {
  Mat<S> w(in, out);
  const S std_dev = S(1) / std::sqrt(S(in));
  for (int i = 0; i < in; ++i)
    for (int j = 0; j < out; ++j) w(i, j) = S(rng.gaussian()) * std_dev;
  auto p = std::make_shared<Param<S>>();
  p->name = name;
  p->var = Var<S>::leaf(std::move(w));
  return p;
}

template <typename S>
ParamPtr<S> make_embedding_param(const std::string& name, int rows, int cols, Rng& rng,
                                 double std_dev = 0.02) {
  Mat<S> w(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) w(i, j) = S(rng.gaussian() * std_dev);
  auto p = std::make_shared<Param<S>>();
  p->name = name;
  p->var = Var<S>::leaf(std::move(w));
  return p;
}

template <typename S>
ParamPtr<S> make_const_param(const std::string& name, int rows, int cols, S fill) {
  auto p = std::make_shared<Param<S>>();
  p->name = name;
  p->var = Var<S>::leaf(Mat<S>::Constant(rows, cols, fill));
  return p;
}

// View of every parameter in a model, used by the optimizer, checkpointing
// and the freeze audit.
template <typename S>
class ParamRegistry {
 public:
  void add(ParamPtr<S> p) { params_.push_back(std::move(p)); }
  void extend(const ParamRegistry& other) {
    for (const auto& p : other.params_) params_.push_back(p);
  }

  const std::vector<ParamPtr<S>>& all() const { return params_; }

  std::vector<ParamPtr<S>> trainable() const {
    std::vector<ParamPtr<S>> out;
    for (const auto& p : params_)
      if (p->trainable) out.push_back(p);
    return out;
  }

  std::vector<std::string> trainable_names() const {
    std::vector<std::string> out;
    for (const auto& p : params_)
      if (p->trainable) out.push_back(p->name);
    std::sort(out.begin(), out.end());
    return out;
  }

  ParamPtr<S> find(const std::string& name) const {
    for (const auto& p : params_)
      if (p->name == name) return p;
    return nullptr;
  }

  long total_size(bool trainable_only = false) const {
    long n = 0;
    for (const auto& p : params_)
      if (!trainable_only || p->trainable) n += long(p->value().size());
    return n;
  }

  void zero_grads() {
    for (const auto& p : params_) p->var.zero_grad();
  }

 private:
  std::vector<ParamPtr<S>> params_;
};

// Weight fetch used by tape forwards: identity normally, straight-through
// bf16 rounding when emulating bfloat16 weights over fp32 masters.
template <typename S>
Var<S> use_weight(const ParamPtr<S>& p, bool bf16) {
  return bf16 ? bf16_cast(p->var) : p->var;
}

template <typename S>
Mat<S> weight_matrix(const ParamPtr<S>& p, bool bf16) {
  if (!bf16) return p->value();
  return p->value().unaryExpr([](S x) { return S(bf16_round(static_cast<float>(x))); });
}

}  // namespace cslt
