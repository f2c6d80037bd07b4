#pragma once

#include <nlohmann/json.hpp>

#include "cslt/decoder.hpp"
#include "cslt/mapping_network.hpp"
#include "cslt/prompting.hpp"
#include "cslt/tensor_store.hpp"
#include "cslt/tokenizer.hpp"

namespace cslt {

enum class TrainableMode { adapters, full };

inline TrainableMode parse_trainable_mode(const std::string& s) {
  if (s == "adapters") return TrainableMode::adapters;
  if (s == "full") return TrainableMode::full;
  throw ConfigError("unknown trainable mode: " + s);
}

struct DecodingConfig {
  std::string strategy = "greedy";
  int max_new_tokens = 64;
  uint64_t seed = 0;  // recorded for reproducibility; greedy ignores it

  void validate() const {
    if (strategy != "greedy")
      throw ConfigError("only greedy decoding is implemented, got '" + strategy + "'");
    if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
  }
};

struct BuildOptions {
  uint64_t seed = 0;
  TrainableMode mode = TrainableMode::adapters;
  bool bf16_weights = false;
};

// ---------------------------------------------------------------------------
// TranslationModel: mapping network + decoder behind the prompt interface.

template <typename S>
class TranslationModel {
 public:
  TranslationModel() = default;

  TranslationModel(DecoderSpec spec, MappingNetworkConfig mapping_cfg,
                   std::optional<AdapterConfig> adapter_cfg, WordTokenizer tokenizer,
                   PromptTemplate tmpl, BuildOptions opts)
      : tokenizer_(std::move(tokenizer)),
        template_(std::move(tmpl)),
        opts_(opts) {
    spec.vocab_size = tokenizer_.vocab_size();
    if (spec.model_id != "tiny")
      throw ConfigError("unknown model_id '" + spec.model_id +
                        "' (no pre-trained weights available)");
    if (mapping_cfg.out_dim == 0) mapping_cfg.out_dim = spec.embed_dim;
    if (mapping_cfg.out_dim != spec.embed_dim)
      throw ConfigError("mapping out_dim " + std::to_string(mapping_cfg.out_dim) +
                        " != decoder embed_dim " + std::to_string(spec.embed_dim));
    template_.validate();

    Rng rng(opts.seed);
    decoder_ = TinyTransformerDecoder<S>(spec, rng);
    if (adapter_cfg) decoder_.attach_adapters(*adapter_cfg, rng);
    mapping_ = MappingNetwork<S>(mapping_cfg, rng);

    decoder_.register_params(registry_);
    mapping_.register_params(registry_);
    apply_trainable_mode();
  }

  const DecoderSpec& spec() const { return decoder_.spec(); }
  const MappingNetwork<S>& mapping() const { return mapping_; }
  const TinyTransformerDecoder<S>& decoder() const { return decoder_; }
  TinyTransformerDecoder<S>& decoder_mut() { return decoder_; }
  const WordTokenizer& tokenizer() const { return tokenizer_; }
  const PromptTemplate& prompt_template() const { return template_; }
  void set_prompt_template(PromptTemplate t) {
    t.validate();
    template_ = std::move(t);
  }
  ParamRegistry<S>& params() { return registry_; }
  const ParamRegistry<S>& params() const { return registry_; }
  const BuildOptions& options() const { return opts_; }
  bool bf16() const { return opts_.bf16_weights; }

  std::map<std::string, std::string> frozen_digests() const {
    std::map<std::string, std::string> out;
    for (const auto& p : registry_.all())
      if (!p->trainable) out[p->name] = tensor_digest(p->value());
    return out;
  }

  // -------------------------------------------------------------------
  // Teacher-forced loss: prompt positions are excluded, supervision covers
  // the target tokens and the end-of-sentence token.
  Var<S> forward_loss(const std::vector<PromptSegment>& segments,
                      const VisualFeatureSequence* features, const std::string& target_text,
                      Rng* dropout_rng = nullptr) const {
    std::vector<int> target_ids = tokenizer_.encode(target_text);
    if (target_ids.empty()) throw DataError("empty target text");

    std::vector<Var<S>> chunks;
    std::vector<int> flat_ids;
    build_prefix_tape(segments, features, chunks, flat_ids);
    const int prefix_rows = static_cast<int>(flat_ids.size());

    chunks.push_back(decoder_.embed_rows(target_ids, bf16()));
    for (int id : target_ids) flat_ids.push_back(id);
    chunks.push_back(decoder_.embed_rows({WordTokenizer::kEos}, bf16()));
    flat_ids.push_back(WordTokenizer::kEos);

    auto content = concat_rows(chunks);
    auto logits = decoder_.forward_tape(content, dropout_rng, bf16());

    const int total = static_cast<int>(flat_ids.size());
    std::vector<int> ce_targets(total, 0);
    std::vector<char> ce_mask(total, 0);
    for (int i = prefix_rows - 1; i + 1 < total; ++i) {
      ce_targets[i] = flat_ids[i + 1];
      ce_mask[i] = 1;
    }
    return cross_entropy_masked(logits, ce_targets, ce_mask);
  }

  // -------------------------------------------------------------------
  // Greedy generation with a KV cache; stops at <eos> or max_new_tokens
  // (the context length also caps decoding).
  TranslationHypothesis generate(const std::vector<PromptSegment>& segments,
                                 const VisualFeatureSequence* features,
                                 const DecodingConfig& decoding) const {
    decoding.validate();
    Mat<S> prefix = build_prefix_nograd(segments, features);

    typename TinyTransformerDecoder<S>::Cache cache;
    Mat<S> logits = decoder_.forward_nograd(prefix, cache, bf16());

    std::vector<int> out_ids;
    for (int step = 0; step < decoding.max_new_tokens; ++step) {
      Eigen::Index best = 0;
      logits.row(logits.rows() - 1).maxCoeff(&best);
      int token = static_cast<int>(best);
      if (token == WordTokenizer::kEos) break;
      out_ids.push_back(token);
      if (cache.len + 1 > spec().max_seq_len) break;
      Mat<S> row = decoder_.embed_rows_nograd({token}, bf16());
      logits = decoder_.forward_nograd(row, cache, bf16());
    }

    TranslationHypothesis hyp;
    hyp.text = tokenizer_.decode(out_ids);
    hyp.token_count = static_cast<int>(out_ids.size());
    hyp.prompt_transcript = render_transcript(segments);
    return hyp;
  }

  // Logits over a raw token sequence; exposes the base decoder for tests.
  Mat<S> token_logits(const std::vector<int>& ids) const {
    typename TinyTransformerDecoder<S>::Cache cache;
    return decoder_.forward_nograd(decoder_.embed_rows_nograd(ids, bf16()), cache, bf16());
  }

  // -------------------------------------------------------------------
  // Checkpointing

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    TensorStore<S> store;
    for (const auto& p : registry_.all()) store.put(p->name, p->value());
    store.save(dir / "model.bin");
    tokenizer_.save(dir / "vocab.txt");

    nlohmann::json meta;
    const auto& sp = spec();
    meta["model_id"] = sp.model_id;
    meta["embed_dim"] = sp.embed_dim;
    meta["num_layers"] = sp.num_layers;
    meta["num_heads"] = sp.num_heads;
    meta["ff_dim"] = sp.ff_dim;
    meta["max_seq_len"] = sp.max_seq_len;
    meta["scalar_bytes"] = sizeof(S);
    meta["seed"] = opts_.seed;
    meta["trainable_mode"] = opts_.mode == TrainableMode::full ? "full" : "adapters";
    meta["bf16_weights"] = opts_.bf16_weights;

    const auto& mc = mapping_.config();
    meta["mapping"] = {{"variant", MappingNetworkConfig::variant_name(mc.variant)},
                       {"in_dim", mc.in_dim},
                       {"out_dim", mc.out_dim}};
    if (decoder_.has_adapters()) {
      const auto& ac = decoder_.adapter_config();
      meta["adapter"] = {{"rank", ac.rank},
                         {"alpha", ac.alpha},
                         {"dropout", ac.dropout},
                         {"target_query", ac.target_query},
                         {"target_value", ac.target_value},
                         {"embedding_frozen", ac.embedding_frozen}};
    }
    meta["prompt"] = {{"instruction", template_.instruction},
                      {"prev_prompt", template_.prev_prompt},
                      {"pg_prompt", template_.pg_prompt},
                      {"bg_prompt", template_.bg_prompt},
                      {"vid_prompt", template_.vid_prompt},
                      {"cue_order", cue_order_string(template_)}};
    meta["frozen_digests"] = frozen_digests();
    write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  }

  static TranslationModel load(const std::filesystem::path& dir) {
    auto meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
    if (meta.at("scalar_bytes").get<int>() != int(sizeof(S)))
      throw DataError("checkpoint precision does not match this build of load()");

    DecoderSpec spec;
    spec.model_id = meta.at("model_id").get<std::string>();
    spec.embed_dim = meta.at("embed_dim").get<int>();
    spec.num_layers = meta.at("num_layers").get<int>();
    spec.num_heads = meta.at("num_heads").get<int>();
    spec.ff_dim = meta.at("ff_dim").get<int>();
    spec.max_seq_len = meta.at("max_seq_len").get<int>();

    MappingNetworkConfig mc;
    mc.variant = MappingNetworkConfig::parse_variant(meta.at("mapping").at("variant"));
    mc.in_dim = meta.at("mapping").at("in_dim").get<int>();
    mc.out_dim = meta.at("mapping").at("out_dim").get<int>();
    if (mc.variant == MappingNetworkConfig::Variant::cnn_mlp) mc.cnn = CnnConfig{};

    std::optional<AdapterConfig> ac;
    if (meta.contains("adapter")) {
      AdapterConfig a;
      a.rank = meta["adapter"].at("rank").get<int>();
      a.alpha = meta["adapter"].at("alpha").get<double>();
      a.dropout = meta["adapter"].at("dropout").get<double>();
      a.target_query = meta["adapter"].at("target_query").get<bool>();
      a.target_value = meta["adapter"].at("target_value").get<bool>();
      a.embedding_frozen = meta["adapter"].at("embedding_frozen").get<bool>();
      ac = a;
    }

    PromptTemplate tmpl;
    tmpl.instruction = meta.at("prompt").at("instruction").get<std::string>();
    tmpl.prev_prompt = meta.at("prompt").at("prev_prompt").get<std::string>();
    tmpl.pg_prompt = meta.at("prompt").at("pg_prompt").get<std::string>();
    tmpl.bg_prompt = meta.at("prompt").at("bg_prompt").get<std::string>();
    tmpl.vid_prompt = meta.at("prompt").at("vid_prompt").get<std::string>();
    tmpl.cue_order = parse_cue_order(meta.at("prompt").at("cue_order").get<std::string>());

    BuildOptions opts;
    opts.seed = meta.at("seed").get<uint64_t>();
    opts.mode = parse_trainable_mode(meta.at("trainable_mode").get<std::string>());
    opts.bf16_weights = meta.at("bf16_weights").get<bool>();

    TranslationModel model(spec, mc, ac, WordTokenizer::load(dir / "vocab.txt"),
                           std::move(tmpl), opts);
    auto store = TensorStore<S>::load(dir / "model.bin");
    for (const auto& p : model.registry_.all()) {
      const Mat<S>& stored = store.get(p->name);
      if (stored.rows() != p->value().rows() || stored.cols() != p->value().cols())
        throw DataError("checkpoint shape mismatch for " + p->name);
      p->value() = stored;
    }
    return model;
  }

  static std::string cue_order_string(const PromptTemplate& t) {
    std::vector<std::string> names;
    for (Cue c : t.cue_order) names.push_back(cue_name(c));
    return join(names, ",");
  }

  static std::array<Cue, 4> parse_cue_order(const std::string& s) {
    std::array<Cue, 4> order{};
    size_t i = 0;
    for (const auto& part : split_whitespace(to_lower(s))) {
      std::string token = part;
      size_t pos = 0;
      while (pos < token.size()) {
        size_t comma = token.find(',', pos);
        std::string name =
            token.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        pos = comma == std::string::npos ? token.size() : comma + 1;
        if (name.empty()) continue;
        if (i >= 4) throw ConfigError("cue_order has too many entries: " + s);
        order[i++] = parse_cue(name);
      }
    }
    if (i != 4) throw ConfigError("cue_order must name all four cues: " + s);
    return order;
  }

 private:
  void apply_trainable_mode() {
    for (const auto& p : registry_.all()) {
      bool is_mapping = starts_with(p->name, "mapping.");
      bool is_adapter = decoder_.is_adapter_param(p->name);
      bool is_embedding = p->name == "decoder.embed";
      bool trainable;
      if (opts_.mode == TrainableMode::full) {
        trainable = true;
      } else {
        trainable = is_mapping || is_adapter;
        if (is_embedding && decoder_.has_adapters() &&
            !decoder_.adapter_config().embedding_frozen)
          trainable = true;
      }
      p->trainable = trainable;
      p->var.node()->requires_grad = trainable;
      if (trainable) p->var.node()->ensure_grad();
    }
  }

  void build_prefix_tape(const std::vector<PromptSegment>& segments,
                         const VisualFeatureSequence* features, std::vector<Var<S>>& chunks,
                         std::vector<int>& flat_ids) const {
    chunks.push_back(decoder_.embed_rows({WordTokenizer::kBos}, bf16()));
    flat_ids.push_back(WordTokenizer::kBos);
    for (const auto& seg : segments) {
      if (seg.kind == PromptSegment::Kind::text) {
        auto ids = tokenizer_.encode(seg.text);
        if (ids.empty()) continue;
        chunks.push_back(decoder_.embed_rows(ids, bf16()));
        for (int id : ids) flat_ids.push_back(id);
      } else {
        const Mat<S> feats = require_features(seg, features);
        auto mapped = mapping_.forward(Var<S>::constant(feats), bf16());
        for (Eigen::Index r = 0; r < mapped.val().rows(); ++r)
          flat_ids.push_back(WordTokenizer::kPad);  // placeholder ids, never supervised
        chunks.push_back(std::move(mapped));
      }
    }
  }

  Mat<S> build_prefix_nograd(const std::vector<PromptSegment>& segments,
                             const VisualFeatureSequence* features) const {
    std::vector<Mat<S>> chunks;
    chunks.push_back(decoder_.embed_rows_nograd({WordTokenizer::kBos}, bf16()));
    Eigen::Index total = 1;
    for (const auto& seg : segments) {
      if (seg.kind == PromptSegment::Kind::text) {
        auto ids = tokenizer_.encode(seg.text);
        if (ids.empty()) continue;
        chunks.push_back(decoder_.embed_rows_nograd(ids, bf16()));
      } else {
        const Mat<S> feats = require_features(seg, features);
        chunks.push_back(mapping_.forward_nograd(feats, bf16()));
      }
      total += chunks.back().rows();
    }
    Mat<S> out(total, spec().embed_dim);
    Eigen::Index r = 0;
    for (const auto& c : chunks) {
      out.middleRows(r, c.rows()) = c;
      r += c.rows();
    }
    return out;
  }

  Mat<S> require_features(const PromptSegment& seg, const VisualFeatureSequence* features) const {
    if (!features) throw DataError("prompt has a visual span but no features were provided");
    if (features->num_features() != seg.visual_len)
      throw DataError("visual span length " + std::to_string(seg.visual_len) +
                      " != feature rows " + std::to_string(features->num_features()));
    return features->features.template cast<S>();
  }

  WordTokenizer tokenizer_;
  PromptTemplate template_;
  BuildOptions opts_;
  TinyTransformerDecoder<S> decoder_;
  MappingNetwork<S> mapping_;
  ParamRegistry<S> registry_;
};

// Spec'd build entry point; rejects unknown model ids before touching weights.
template <typename S>
TranslationModel<S> build_model(const DecoderSpec& spec, const MappingNetworkConfig& mapping_cfg,
                                const std::optional<AdapterConfig>& adapter_cfg,
                                WordTokenizer tokenizer, PromptTemplate tmpl, BuildOptions opts) {
  return TranslationModel<S>(spec, mapping_cfg, adapter_cfg, std::move(tokenizer),
                             std::move(tmpl), opts);
}

}  // namespace cslt
