#pragma once

#include "cslt/nn.hpp"

namespace cslt {

struct DecoderSpec {
  std::string model_id = "tiny";
  int embed_dim = 128;
  int vocab_size = 0;  // filled from the tokenizer
  int num_layers = 4;
  int num_heads = 4;
  int ff_dim = 512;
  int max_seq_len = 512;

  void validate() const {
    if (embed_dim < 1 || num_layers < 1 || num_heads < 1 || ff_dim < 1 || max_seq_len < 1)
      throw ConfigError("decoder dimensions must be positive");
    if (embed_dim % num_heads != 0)
      throw ConfigError("embed_dim must be divisible by num_heads");
    if (vocab_size < 5) throw ConfigError("decoder vocab too small");
  }
};

struct AdapterConfig {
  int rank = 4;
  double alpha = 16.0;
  double dropout = 0.05;
  bool target_query = true;
  bool target_value = true;
  bool embedding_frozen = true;

  void validate() const {
    if (rank < 1) throw ConfigError("adapter rank must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("adapter dropout must be in [0,1)");
    if (!target_query && !target_value)
      throw ConfigError("adapter target projections must be non-empty");
  }
};

// Closed form: per targeted projection, a rank-r pair (d x r) and (r x d).
inline long adapter_param_count(const DecoderSpec& spec, const AdapterConfig& cfg) {
  long targets = long(cfg.target_query) + long(cfg.target_value);
  return long(spec.num_layers) * targets * 2L * spec.embed_dim * cfg.rank;
}

// ---------------------------------------------------------------------------
// TinyTransformerDecoder: pre-LN causal transformer with learned positions,
// optional low-rank adapters on the query/value projections. Doubles as the
// test stub when its weights are zeroed or pinned.
template <typename S>
class TinyTransformerDecoder {
 public:
  struct LayerParams {
    ParamPtr<S> ln1_g, ln1_b;
    ParamPtr<S> wq, wk, wv, wo;
    ParamPtr<S> lora_q_a, lora_q_b, lora_v_a, lora_v_b;  // null when absent
    ParamPtr<S> ln2_g, ln2_b;
    ParamPtr<S> w1, b1, w2, b2;
  };

  struct Cache {
    std::vector<Mat<S>> k, v;
    int len = 0;
  };

  TinyTransformerDecoder() = default;

  TinyTransformerDecoder(DecoderSpec spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    const int d = spec_.embed_dim;
    embed_ = make_embedding_param<S>("decoder.embed", spec_.vocab_size, d, rng);
    pos_ = make_embedding_param<S>("decoder.pos", spec_.max_seq_len, d, rng);
    layers_.resize(spec_.num_layers);
    for (int l = 0; l < spec_.num_layers; ++l) {
      std::string base = "decoder.layer" + std::to_string(l);
      auto& lp = layers_[l];
      lp.ln1_g = make_const_param<S>(base + ".ln1.g", 1, d, S(1));
      lp.ln1_b = make_const_param<S>(base + ".ln1.b", 1, d, S(0));
      lp.wq = make_linear_param<S>(base + ".wq", d, d, rng);
      lp.wk = make_linear_param<S>(base + ".wk", d, d, rng);
      lp.wv = make_linear_param<S>(base + ".wv", d, d, rng);
      lp.wo = make_linear_param<S>(base + ".wo", d, d, rng);
      lp.ln2_g = make_const_param<S>(base + ".ln2.g", 1, d, S(1));
      lp.ln2_b = make_const_param<S>(base + ".ln2.b", 1, d, S(0));
      lp.w1 = make_linear_param<S>(base + ".mlp.w1", d, spec_.ff_dim, rng);
      lp.b1 = make_const_param<S>(base + ".mlp.b1", 1, spec_.ff_dim, S(0));
      lp.w2 = make_linear_param<S>(base + ".mlp.w2", spec_.ff_dim, d, rng);
      lp.b2 = make_const_param<S>(base + ".mlp.b2", 1, d, S(0));
    }
    lnf_g_ = make_const_param<S>("decoder.lnf.g", 1, d, S(1));
    lnf_b_ = make_const_param<S>("decoder.lnf.b", 1, d, S(0));
    lm_w_ = make_linear_param<S>("decoder.lm_head.w", d, spec_.vocab_size, rng);
    lm_b_ = make_const_param<S>("decoder.lm_head.b", 1, spec_.vocab_size, S(0));
  }

  const DecoderSpec& spec() const { return spec_; }
  bool has_adapters() const { return adapters_ != std::nullopt; }
  const AdapterConfig& adapter_config() const {
    if (!adapters_) throw std::logic_error("no adapters attached");
    return *adapters_;
  }

  // Down projections get fan-in random init, up projections start at zero so
  // the adapted decoder matches the base decoder at step 0.
  void attach_adapters(const AdapterConfig& cfg, Rng& rng) {
    cfg.validate();
    adapters_ = cfg;
    const int d = spec_.embed_dim;
    for (int l = 0; l < spec_.num_layers; ++l) {
      std::string base = "decoder.layer" + std::to_string(l);
      auto& lp = layers_[l];
      if (cfg.target_query) {
        lp.lora_q_a = make_linear_param<S>(base + ".wq.lora_a", d, cfg.rank, rng);
        lp.lora_q_b = make_const_param<S>(base + ".wq.lora_b", cfg.rank, d, S(0));
      }
      if (cfg.target_value) {
        lp.lora_v_a = make_linear_param<S>(base + ".wv.lora_a", d, cfg.rank, rng);
        lp.lora_v_b = make_const_param<S>(base + ".wv.lora_b", cfg.rank, d, S(0));
      }
    }
  }

  void register_params(ParamRegistry<S>& reg) const {
    reg.add(embed_);
    reg.add(pos_);
    for (const auto& lp : layers_) {
      for (const auto& p : {lp.ln1_g, lp.ln1_b, lp.wq, lp.wk, lp.wv, lp.wo, lp.ln2_g, lp.ln2_b,
                            lp.w1, lp.b1, lp.w2, lp.b2})
        reg.add(p);
      for (const auto& p : {lp.lora_q_a, lp.lora_q_b, lp.lora_v_a, lp.lora_v_b})
        if (p) reg.add(p);
    }
    reg.add(lnf_g_);
    reg.add(lnf_b_);
    reg.add(lm_w_);
    reg.add(lm_b_);
  }

  bool is_adapter_param(const std::string& name) const {
    return name.find(".lora_") != std::string::npos;
  }

  ParamPtr<S> embedding() const { return embed_; }
  ParamPtr<S> lm_bias() const { return lm_b_; }
  ParamPtr<S> lm_weight() const { return lm_w_; }

  // ---------------------------------------------------------------------
  // Tape forward over a full sequence of content rows (token embeddings and
  // injected visual embeddings, positions added here).
  Var<S> forward_tape(const Var<S>& content, Rng* dropout_rng, bool bf16) const {
    const int t_len = static_cast<int>(content.val().rows());
    check_length(t_len);
    std::vector<int> pos_ids(t_len);
    for (int i = 0; i < t_len; ++i) pos_ids[i] = i;
    Var<S> x = add(content, gather_rows(use_weight(pos_, bf16), pos_ids));

    const int heads = spec_.num_heads;
    const int dh = spec_.embed_dim / heads;
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));

    for (const auto& lp : layers_) {
      auto h = layernorm(x, use_weight(lp.ln1_g, bf16), use_weight(lp.ln1_b, bf16));
      auto q = project(h, lp.wq, lp.lora_q_a, lp.lora_q_b, dropout_rng, bf16);
      auto k = matmul(h, use_weight(lp.wk, bf16));
      auto v = project(h, lp.wv, lp.lora_v_a, lp.lora_v_b, dropout_rng, bf16);

      std::vector<Var<S>> head_ctx;
      for (int hd = 0; hd < heads; ++hd) {
        auto qh = cols(q, hd * dh, dh);
        auto kh = cols(k, hd * dh, dh);
        auto vh = cols(v, hd * dh, dh);
        auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
        auto probs = causal_softmax(scores, 0);
        head_ctx.push_back(matmul(probs, vh));
      }
      auto ctx = concat_cols(head_ctx);
      x = add(x, matmul(ctx, use_weight(lp.wo, bf16)));

      auto h2 = layernorm(x, use_weight(lp.ln2_g, bf16), use_weight(lp.ln2_b, bf16));
      auto m = add_rowvec(matmul(h2, use_weight(lp.w1, bf16)), use_weight(lp.b1, bf16));
      m = gelu(m);
      m = add_rowvec(matmul(m, use_weight(lp.w2, bf16)), use_weight(lp.b2, bf16));
      x = add(x, m);
    }
    auto xf = layernorm(x, use_weight(lnf_g_, bf16), use_weight(lnf_b_, bf16));
    return add_rowvec(matmul(xf, use_weight(lm_w_, bf16)), use_weight(lm_b_, bf16));
  }

  Var<S> embed_rows(const std::vector<int>& ids, bool bf16) const {
    return gather_rows(use_weight(embed_, bf16), ids);
  }

  Mat<S> embed_rows_nograd(const std::vector<int>& ids, bool bf16) const {
    Mat<S> table = weight_matrix(embed_, bf16);
    Mat<S> out(ids.size(), table.cols());
    for (size_t i = 0; i < ids.size(); ++i) out.row(i) = table.row(ids[i]);
    return out;
  }

  // ---------------------------------------------------------------------
  // Gradient-free forward with a KV cache. `content` holds the new rows;
  // cache rows come first in attention. Returns logits for the new rows.
  Mat<S> forward_nograd(const Mat<S>& content, Cache& cache, bool bf16) const {
    const int n_new = static_cast<int>(content.rows());
    const int offset = cache.len;
    check_length(offset + n_new);
    if (cache.k.empty()) {
      cache.k.resize(layers_.size());
      cache.v.resize(layers_.size());
    }

    Mat<S> pos_table = weight_matrix(pos_, bf16);
    Mat<S> x = content;
    for (int i = 0; i < n_new; ++i) x.row(i) += pos_table.row(offset + i);

    const int heads = spec_.num_heads;
    const int dh = spec_.embed_dim / heads;
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));

    for (size_t l = 0; l < layers_.size(); ++l) {
      const auto& lp = layers_[l];
      Mat<S> h = ln_rows(x, weight_matrix(lp.ln1_g, bf16), weight_matrix(lp.ln1_b, bf16));
      Mat<S> q = project_nograd(h, lp.wq, lp.lora_q_a, lp.lora_q_b, bf16);
      Mat<S> k = h * weight_matrix(lp.wk, bf16);
      Mat<S> v = project_nograd(h, lp.wv, lp.lora_v_a, lp.lora_v_b, bf16);

      Mat<S>& k_all = cache.k[l];
      Mat<S>& v_all = cache.v[l];
      append_rows(k_all, k);
      append_rows(v_all, v);

      Mat<S> ctx(n_new, spec_.embed_dim);
      for (int hd = 0; hd < heads; ++hd) {
        auto qh = q.middleCols(hd * dh, dh);
        auto kh = k_all.middleCols(hd * dh, dh);
        auto vh = v_all.middleCols(hd * dh, dh);
        Mat<S> scores = qh * kh.transpose() * inv_sqrt_dh;
        for (int i = 0; i < n_new; ++i) {
          int limit = offset + i + 1;
          auto row = scores.row(i).head(limit);
          S m = row.maxCoeff();
          Eigen::Array<S, 1, Eigen::Dynamic> e = (row.array() - m).exp();
          e /= e.sum();
          ctx.row(i).segment(hd * dh, dh) = e.matrix() * vh.topRows(limit);
        }
      }
      x += ctx * weight_matrix(lp.wo, bf16);

      Mat<S> h2 = ln_rows(x, weight_matrix(lp.ln2_g, bf16), weight_matrix(lp.ln2_b, bf16));
      Mat<S> m1 = (h2 * weight_matrix(lp.w1, bf16)).rowwise() +
                  weight_matrix(lp.b1, bf16).row(0);
      m1 = m1.unaryExpr([](S v_) {
        return S(0.5) * v_ * (S(1) + std::erf(v_ / std::sqrt(S(2))));
      });
      x += (m1 * weight_matrix(lp.w2, bf16)).rowwise() + weight_matrix(lp.b2, bf16).row(0);
    }
    cache.len += n_new;
    Mat<S> xf = ln_rows(x, weight_matrix(lnf_g_, bf16), weight_matrix(lnf_b_, bf16));
    return (xf * weight_matrix(lm_w_, bf16)).rowwise() + weight_matrix(lm_b_, bf16).row(0);
  }

 private:
  void check_length(int t_len) const {
    if (t_len > spec_.max_seq_len)
      throw DataError("sequence length " + std::to_string(t_len) +
                      " exceeds decoder context length " + std::to_string(spec_.max_seq_len));
  }

  Var<S> project(const Var<S>& h, const ParamPtr<S>& w, const ParamPtr<S>& a,
                 const ParamPtr<S>& b, Rng* dropout_rng, bool bf16) const {
    Var<S> out = matmul(h, use_weight(w, bf16));
    if (a && b) {
      Var<S> src = h;
      const double p = adapters_->dropout;
      if (dropout_rng && p > 0.0) {
        Mat<S> mask(h.val().rows(), h.val().cols());
        const S keep_scale = S(1.0 / (1.0 - p));
        for (Eigen::Index i = 0; i < mask.rows(); ++i)
          for (Eigen::Index j = 0; j < mask.cols(); ++j)
            mask(i, j) = dropout_rng->bernoulli(p) ? S(0) : keep_scale;
        src = mul_mask(src, mask);
      }
      auto low = matmul(matmul(src, use_weight(a, bf16)), use_weight(b, bf16));
      out = add(out, scale(low, S(adapters_->alpha / adapters_->rank)));
    }
    return out;
  }

  Mat<S> project_nograd(const Mat<S>& h, const ParamPtr<S>& w, const ParamPtr<S>& a,
                        const ParamPtr<S>& b, bool bf16) const {
    Mat<S> out = h * weight_matrix(w, bf16);
    if (a && b) {
      Mat<S> low = (h * weight_matrix(a, bf16)) * weight_matrix(b, bf16);
      out += low * S(adapters_->alpha / adapters_->rank);
    }
    return out;
  }

  static Mat<S> ln_rows(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta) {
    Mat<S> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      S mu = x.row(r).mean();
      S var = (x.row(r).array() - mu).square().mean();
      S inv = S(1) / std::sqrt(var + S(1e-5));
      out.row(r) =
          ((x.row(r).array() - mu) * inv * gamma.row(0).array() + beta.row(0).array()).matrix();
    }
    return out;
  }

  static void append_rows(Mat<S>& dst, const Mat<S>& rows) {
    if (dst.size() == 0) {
      dst = rows;
      return;
    }
    Mat<S> merged(dst.rows() + rows.rows(), rows.cols());
    merged.topRows(dst.rows()) = dst;
    merged.bottomRows(rows.rows()) = rows;
    dst = std::move(merged);
  }

  DecoderSpec spec_;
  std::optional<AdapterConfig> adapters_;
  ParamPtr<S> embed_, pos_;
  std::vector<LayerParams> layers_;
  ParamPtr<S> lnf_g_, lnf_b_, lm_w_, lm_b_;
};

}  // namespace cslt
