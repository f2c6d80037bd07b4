#pragma once

#include "cslt/nn.hpp"

namespace cslt {

struct CnnConfig {
  int kernel = 5;
  int stride = 1;
  int padding = 2;
  int pool_kernel = 2;
  int pool_stride = 2;
  int layers = 2;
};

struct MappingNetworkConfig {
  enum class Variant { mlp, cnn_mlp };
  Variant variant = Variant::mlp;
  int in_dim = 768;   // visual feature width
  int out_dim = 0;    // decoder embedding width
  std::optional<CnnConfig> cnn;

  void validate() const {
    if (in_dim < 1 || out_dim < 1) throw ConfigError("mapping dims must be positive");
    if ((variant == Variant::cnn_mlp) != cnn.has_value())
      throw ConfigError("cnn config present iff variant is cnn_mlp");
    if (cnn && (cnn->kernel < 1 || cnn->stride != 1 || cnn->pool_kernel < 1 ||
                cnn->pool_stride < 1 || cnn->layers < 1))
      throw ConfigError("unsupported cnn geometry");
  }

  static Variant parse_variant(const std::string& s) {
    if (s == "mlp") return Variant::mlp;
    if (s == "cnn_mlp") return Variant::cnn_mlp;
    throw ConfigError("unknown mapping variant: " + s);
  }

  static const char* variant_name(Variant v) { return v == Variant::mlp ? "mlp" : "cnn_mlp"; }
};

// Projects visual features into the decoder embedding space.
//   mlp:      fc2(gelu(fc1(x)))                          T' = T
//   cnn_mlp:  two (conv k5 s1 p2 -> relu -> maxpool k2 s2) blocks, then the
//             MLP                                        T' = floor(floor(T/2)/2)
template <typename S>
class MappingNetwork {
 public:
  MappingNetwork() = default;

  MappingNetwork(MappingNetworkConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.cnn) {
      for (int l = 0; l < cfg_.cnn->layers; ++l) {
        std::string base = "mapping.conv" + std::to_string(l + 1);
        conv_w_.push_back(
            make_linear_param<S>(base + ".w", cfg_.cnn->kernel * cfg_.in_dim, cfg_.in_dim, rng));
        conv_b_.push_back(make_const_param<S>(base + ".b", 1, cfg_.in_dim, S(0)));
      }
    }
    fc1_w_ = make_linear_param<S>("mapping.fc1.w", cfg_.in_dim, cfg_.out_dim, rng);
    fc1_b_ = make_const_param<S>("mapping.fc1.b", 1, cfg_.out_dim, S(0));
    fc2_w_ = make_linear_param<S>("mapping.fc2.w", cfg_.out_dim, cfg_.out_dim, rng);
    fc2_b_ = make_const_param<S>("mapping.fc2.b", 1, cfg_.out_dim, S(0));
  }

  const MappingNetworkConfig& config() const { return cfg_; }

  void register_params(ParamRegistry<S>& reg) const {
    for (size_t i = 0; i < conv_w_.size(); ++i) {
      reg.add(conv_w_[i]);
      reg.add(conv_b_[i]);
    }
    reg.add(fc1_w_);
    reg.add(fc1_b_);
    reg.add(fc2_w_);
    reg.add(fc2_b_);
  }

  int output_rows(int input_rows) const {
    int t = input_rows;
    if (cfg_.cnn)
      for (int l = 0; l < cfg_.cnn->layers; ++l)
        t = (t - cfg_.cnn->pool_kernel) / cfg_.cnn->pool_stride + 1;
    return t;
  }

  Var<S> forward(const Var<S>& features, bool bf16 = false) const {
    if (features.val().cols() != cfg_.in_dim)
      throw DataError("mapping input width " + std::to_string(features.val().cols()) +
                      " != configured in_dim " + std::to_string(cfg_.in_dim));
    Var<S> h = features;
    if (cfg_.cnn) {
      for (size_t l = 0; l < conv_w_.size(); ++l) {
        auto col = im2col_rows(h, cfg_.cnn->kernel, cfg_.cnn->padding);
        h = add_rowvec(matmul(col, use_weight(conv_w_[l], bf16)), use_weight(conv_b_[l], bf16));
        h = relu(h);
        h = maxpool_rows(h, cfg_.cnn->pool_kernel, cfg_.cnn->pool_stride);
      }
    }
    h = gelu(add_rowvec(matmul(h, use_weight(fc1_w_, bf16)), use_weight(fc1_b_, bf16)));
    return add_rowvec(matmul(h, use_weight(fc2_w_, bf16)), use_weight(fc2_b_, bf16));
  }

  Mat<S> forward_nograd(const Mat<S>& features, bool bf16 = false) const {
    auto v = forward(Var<S>::constant(features), bf16);
    return v.val();
  }

 private:
  MappingNetworkConfig cfg_;
  std::vector<ParamPtr<S>> conv_w_, conv_b_;
  ParamPtr<S> fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

}  // namespace cslt
