#pragma once

#include <iostream>

#include "cslt/augment.hpp"
#include "cslt/cue_extraction.hpp"
#include "cslt/manifest.hpp"
#include "cslt/model.hpp"

namespace cslt {

struct TrainConfig {
  int epochs = 10;
  int warmup_epochs = 5;  // linear warmup, then constant
  double lr = 1e-4;
  double grad_clip = 1.0;
  int batch_size = 2;
  int accum_steps = 1;  // gradient accumulation to emulate a larger effective batch
  uint64_t seed = 0;
  bool augment_enabled = true;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (warmup_epochs < 0 || warmup_epochs > epochs)
      throw ConfigError("warmup_epochs must be in [0, epochs]");
    if (lr <= 0) throw ConfigError("lr must be positive");
    if (grad_clip <= 0) throw ConfigError("grad_clip must be positive");
    if (batch_size < 1 || accum_steps < 1)
      throw ConfigError("batch_size and accum_steps must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Adam with bias correction and global-norm clipping.

template <typename S>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  long steps() const { return step_; }

  // Scales accumulated grads by grad_scale, clips the global norm, applies
  // the update, zeroes grads. Returns the pre-clip gradient norm.
  double step(ParamRegistry<S>& params, double lr, double grad_clip, double grad_scale) {
    double norm_sq = 0.0;
    for (const auto& p : params.trainable()) {
      p->grad() *= S(grad_scale);
      norm_sq += double(p->grad().squaredNorm());
    }
    const double norm = std::sqrt(norm_sq);
    const double clip_scale = (grad_clip > 0 && norm > grad_clip) ? grad_clip / norm : 1.0;

    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, double(step_));
    const double bc2 = 1.0 - std::pow(beta2_, double(step_));
    for (const auto& p : params.trainable()) {
      Mat<S>& g = p->grad();
      if (clip_scale != 1.0) g *= S(clip_scale);
      Mat<S>& m = slot(m_, p);
      Mat<S>& v = slot(v_, p);
      m = S(beta1_) * m + S(1.0 - beta1_) * g;
      v = S(beta2_) * v + (S(1.0 - beta2_) * g.array().square()).matrix();
      auto m_hat = m.array() / S(bc1);
      auto v_hat = v.array() / S(bc2);
      p->value().array() -= S(lr) * m_hat / (v_hat.sqrt() + S(eps_));
      g.setZero();
    }
    return norm;
  }

  void save(const std::filesystem::path& path) const {
    TensorStore<S> store;
    for (const auto& [name, m] : m_) store.put("m." + name, m);
    for (const auto& [name, m] : v_) store.put("v." + name, m);
    Mat<S> meta(1, 1);
    meta(0, 0) = S(step_);
    store.put("step", meta);
    store.save(path);
  }

  static AdamOptimizer load(const std::filesystem::path& path) {
    AdamOptimizer opt;
    auto store = TensorStore<S>::load(path);
    for (const auto& [name, m] : store.all()) {
      if (name == "step")
        opt.step_ = long(m(0, 0));
      else if (starts_with(name, "m."))
        opt.m_[name.substr(2)] = m;
      else if (starts_with(name, "v."))
        opt.v_[name.substr(2)] = m;
    }
    return opt;
  }

 private:
  Mat<S>& slot(std::map<std::string, Mat<S>>& bank, const ParamPtr<S>& p) {
    auto it = bank.find(p->name);
    if (it == bank.end())
      it = bank.emplace(p->name, Mat<S>::Zero(p->value().rows(), p->value().cols())).first;
    return it->second;
  }

  double beta1_, beta2_, eps_;
  long step_ = 0;
  std::map<std::string, Mat<S>> m_, v_;
};

// ---------------------------------------------------------------------------
// Training data: cues resolved once up front; sentences with unreadable
// files are skipped with a counter (the paper does not say how these were
// handled; see notes in the repo docs).

struct TrainItem {
  std::string sentence_id;
  std::string prev_sentence_id;  // empty for the first sentence of an episode
  std::string gt_text;
  std::optional<std::string> gt_prev;
  CueBundle bundle;
};

inline std::vector<TrainItem> prepare_items(const Manifest& manifest,
                                            const std::set<std::string>& stopwords,
                                            const CueMask& cue_policy, size_t* skipped_out,
                                            std::ostream* log = nullptr) {
  std::vector<TrainItem> items;
  size_t skipped = 0;
  for (const auto& episode : manifest.episodes) {
    for (size_t t = 0; t < episode.sentences.size(); ++t) {
      const auto& rec = episode.sentences[t];
      std::optional<std::string> prev;
      if (t > 0) prev = episode.sentences[t - 1].gt_text;
      try {
        auto bundle = attach_cues(rec, prev, stopwords).restricted(cue_policy);
        TrainItem item;
        item.sentence_id = rec.sentence_id();
        if (t > 0) item.prev_sentence_id = episode.sentences[t - 1].sentence_id();
        item.gt_text = rec.gt_text;
        item.gt_prev = prev;
        item.bundle = std::move(bundle);
        items.push_back(std::move(item));
      } catch (const DataError& e) {
        ++skipped;
        if (log) (*log) << "skipping " << rec.sentence_id() << ": " << e.what() << "\n";
      }
    }
  }
  if (skipped_out) *skipped_out = skipped;
  return items;
}

// ---------------------------------------------------------------------------
// Training loop

template <typename S>
struct TrainerState {
  AdamOptimizer<S> adam;
  int epochs_completed = 0;
  long global_step = 0;
};

template <typename S>
struct TrainResult {
  std::filesystem::path last_checkpoint;
  std::vector<double> epoch_mean_loss;
  long global_step = 0;
  long prev_cache_fallbacks = 0;
  AugmentStats aug_stats;
};

inline std::string epoch_dir_name(int epoch_completed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03d", epoch_completed);
  return buf;
}

template <typename S>
TrainResult<S> train_model(TranslationModel<S>& model, const std::vector<TrainItem>& items,
                           const AugmentationConfig& aug, const TrainConfig& cfg,
                           const std::filesystem::path& out_dir,
                           const std::map<std::string, std::string>* prev_cache = nullptr,
                           TrainerState<S>* state_in = nullptr) {
  cfg.validate();
  aug.validate();
  if (items.empty()) throw DataError("no training items");
  std::filesystem::create_directories(out_dir);

  TrainerState<S> local_state;
  TrainerState<S>& state = state_in ? *state_in : local_state;

  const long effective_batch = long(cfg.batch_size) * cfg.accum_steps;
  const long opt_steps_per_epoch = (long(items.size()) + effective_batch - 1) / effective_batch;
  const long warmup_steps = long(cfg.warmup_epochs) * opt_steps_per_epoch;

  std::ofstream log(out_dir / "train_log.jsonl", std::ios::app);
  TrainResult<S> result;

  for (int epoch = state.epochs_completed; epoch < cfg.epochs; ++epoch) {
    // the epoch order is a pure function of (seed, epoch) so resumed runs
    // replay the identical schedule
    std::vector<size_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch_shuffle", uint64_t(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    long epoch_loss_count = 0;

    size_t cursor = 0;
    while (cursor < order.size()) {
      model.params().zero_grads();
      double batch_loss_sum = 0.0;
      long batch_count = 0;
      nlohmann::json sample_log = nlohmann::json::array();

      const size_t batch_end = std::min(order.size(), cursor + size_t(effective_batch));
      for (size_t k = cursor; k < batch_end; ++k) {
        const TrainItem& item = items[order[k]];
        const uint64_t sample_seed = derive_seed(cfg.seed, item.sentence_id, uint64_t(epoch));
        Rng rng(sample_seed);

        CueBundle bundle = item.bundle;
        std::string target = item.gt_text;
        if (cfg.augment_enabled) {
          std::optional<std::string> pred_prev;
          if (bundle.cue_mask.prev && prev_cache && !item.prev_sentence_id.empty()) {
            auto it = prev_cache->find(item.prev_sentence_id);
            if (it != prev_cache->end())
              pred_prev = it->second;
            else
              ++result.prev_cache_fallbacks;  // fall back to gt_prev
          }
          bundle = augment(bundle, item.gt_prev, pred_prev, aug, rng, &result.aug_stats);
          target = augment_target(target, aug, rng);
        }

        auto segments = assemble(model.prompt_template(), bundle);
        const VisualFeatureSequence* feats = bundle.visual ? &*bundle.visual : nullptr;
        auto loss = model.forward_loss(segments, feats, target,
                                       cfg.augment_enabled ? &rng : nullptr);
        loss.backward();
        const double loss_value = double(loss.val()(0, 0));
        batch_loss_sum += loss_value;
        ++batch_count;
        sample_log.push_back({{"sentence_id", item.sentence_id}, {"seed", sample_seed}});
      }
      cursor = batch_end;

      const double mean_loss = batch_loss_sum / double(batch_count);
      const double lr = warmup_steps > 0
                            ? cfg.lr * std::min(1.0, double(state.adam.steps() + 1) /
                                                         double(warmup_steps))
                            : cfg.lr;
      if (!std::isfinite(mean_loss)) {
        nlohmann::json diag{{"step", state.global_step},
                            {"epoch", epoch},
                            {"loss", "non-finite"},
                            {"lr", lr},
                            {"samples", sample_log}};
        write_text_file(out_dir / "diagnostics.json", diag.dump(2) + "\n");
        throw std::runtime_error("non-finite training loss at step " +
                                 std::to_string(state.global_step) + "; diagnostic snapshot in " +
                                 (out_dir / "diagnostics.json").string());
      }

      const double grad_norm =
          state.adam.step(model.params(), lr, cfg.grad_clip, 1.0 / double(batch_count));
      ++state.global_step;

      nlohmann::json row{{"step", state.global_step}, {"epoch", epoch},
                         {"loss", mean_loss},         {"lr", lr},
                         {"grad_norm", grad_norm},    {"samples", sample_log}};
      log << row.dump() << "\n";
      epoch_loss_sum += batch_loss_sum;
      epoch_loss_count += batch_count;
    }
    log.flush();

    state.epochs_completed = epoch + 1;
    result.epoch_mean_loss.push_back(epoch_loss_sum / double(epoch_loss_count));

    const auto ckpt = out_dir / epoch_dir_name(epoch + 1);
    model.save(ckpt);
    state.adam.save(ckpt / "optimizer.bin");
    nlohmann::json ts{{"epochs_completed", state.epochs_completed},
                      {"global_step", state.global_step}};
    write_text_file(ckpt / "train_state.json", ts.dump(2) + "\n");
    write_text_file(out_dir / "LATEST", epoch_dir_name(epoch + 1) + std::string("\n"));
    result.last_checkpoint = ckpt;
  }
  result.global_step = state.global_step;
  return result;
}

template <typename S>
struct ResumedTraining {
  TranslationModel<S> model;
  TrainerState<S> state;
};

template <typename S>
ResumedTraining<S> load_train_checkpoint(const std::filesystem::path& ckpt_dir) {
  ResumedTraining<S> out{TranslationModel<S>::load(ckpt_dir), {}};
  if (std::filesystem::exists(ckpt_dir / "optimizer.bin"))
    out.state.adam = AdamOptimizer<S>::load(ckpt_dir / "optimizer.bin");
  if (std::filesystem::exists(ckpt_dir / "train_state.json")) {
    auto ts = nlohmann::json::parse(read_text_file(ckpt_dir / "train_state.json"));
    out.state.epochs_completed = ts.at("epochs_completed").get<int>();
    out.state.global_step = ts.at("global_step").get<long>();
  }
  return out;
}

inline std::filesystem::path resolve_latest_checkpoint(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "meta.json")) return dir;  // already a checkpoint
  if (std::filesystem::exists(dir / "LATEST"))
    return dir / trim(read_text_file(dir / "LATEST"));
  throw DataError("no checkpoint found under " + dir.string());
}

// ---------------------------------------------------------------------------
// Precompute stage: predictions from the no-prev variant feed the
// previous-sentence augmentation of the final model.

template <typename S>
std::map<std::string, std::string> precompute_prev_predictions(
    const TranslationModel<S>& model, const Manifest& manifest,
    const std::set<std::string>& stopwords, const DecodingConfig& decoding,
    const std::filesystem::path& out_path, const std::string& checkpoint_name,
    size_t* skipped_out = nullptr, std::ostream* log = nullptr) {
  const CueMask no_prev = CueMask::parse("vid,pg,bg");
  std::map<std::string, std::string> cache;
  size_t skipped = 0;
  std::ostringstream rows;
  for (const auto& episode : manifest.episodes) {
    for (const auto& rec : episode.sentences) {
      try {
        auto bundle = attach_cues(rec, std::nullopt, stopwords).restricted(no_prev);
        auto segments = assemble(model.prompt_template(), bundle);
        const VisualFeatureSequence* feats = bundle.visual ? &*bundle.visual : nullptr;
        auto hyp = model.generate(segments, feats, decoding);
        cache[rec.sentence_id()] = hyp.text;
        nlohmann::json row{{"sentence_id", rec.sentence_id()},
                           {"text", hyp.text},
                           {"checkpoint", checkpoint_name}};
        rows << row.dump() << "\n";
      } catch (const DataError& e) {
        ++skipped;
        if (log) (*log) << "precompute skip " << rec.sentence_id() << ": " << e.what() << "\n";
      }
    }
  }
  write_text_file(out_path, rows.str());
  if (skipped_out) *skipped_out = skipped;
  return cache;
}

inline std::map<std::string, std::string> load_prev_cache(const std::filesystem::path& path) {
  std::map<std::string, std::string> cache;
  for_each_line(path, [&](size_t lineno, const std::string& line) {
    try {
      auto j = nlohmann::json::parse(line);
      cache[j.at("sentence_id").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed prediction cache line " + std::to_string(lineno) + ": " +
                      e.what());
    }
  });
  return cache;
}

}  // namespace cslt
