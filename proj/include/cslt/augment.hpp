#pragma once

#include "cslt/types.hpp"

namespace cslt {

struct AugmentationConfig {
  double word_drop_max = 0.5;         // drop fraction drawn from U[0, max]
  double word_drop_apply_prob = 0.5;  // per cue per step, apply word drop at all
  double cue_drop_prob = 0.5;
  double prev_pred_prob = 0.5;
  double target_word_drop_max = 0.0;  // 0.2 for the small-corpus regime

  void validate() const {
    for (double v : {word_drop_max, word_drop_apply_prob, cue_drop_prob, prev_pred_prob,
                     target_word_drop_max})
      if (v < 0.0 || v > 1.0) throw ConfigError("augmentation probabilities must be in [0,1]");
  }
};

// Raw draw counters. Cue-drop rates are recorded at the Bernoulli level, i.e.
// every attempted round counts, because conditioning on the non-empty-mask
// rescue would bias the empirical rate below the configured probability.
struct AugmentStats {
  long cue_draws[4] = {0, 0, 0, 0};  // vid, pg, prev, bg
  long cue_drops[4] = {0, 0, 0, 0};
  long prev_choice_draws = 0;
  long prev_pred_chosen = 0;
  double retained_fraction_sum = 0.0;  // one sample per textual cue per draw
  long retained_fraction_count = 0;
  long empty_mask_resamples = 0;

  double cue_drop_rate(int cue) const {
    return cue_draws[cue] ? double(cue_drops[cue]) / double(cue_draws[cue]) : 0.0;
  }
  double prev_pred_rate() const {
    return prev_choice_draws ? double(prev_pred_chosen) / double(prev_choice_draws) : 0.0;
  }
  double mean_retained_fraction() const {
    return retained_fraction_count ? retained_fraction_sum / double(retained_fraction_count)
                                   : 1.0;
  }
};

namespace detail {

// Word drop for one textual cue: with apply_prob, draw p ~ U[0, drop_max] and
// delete each word independently with probability p. Survivors keep their
// relative order. Returns the retained fraction of this draw.
inline double drop_words(std::vector<std::string>& words, double drop_max, double apply_prob,
                         Rng& rng) {
  if (words.empty()) return 1.0;
  const size_t before = words.size();
  if (drop_max > 0.0 && rng.bernoulli(apply_prob)) {
    const double p = rng.uniform(0.0, drop_max);
    std::vector<std::string> kept;
    kept.reserve(words.size());
    for (auto& w : words)
      if (!rng.bernoulli(p)) kept.push_back(std::move(w));
    words = std::move(kept);
  }
  return double(words.size()) / double(before);
}

}  // namespace detail

// Training-time augmentation:
//   1. previous-sentence payload sampled between ground truth and the
//      precomputed prediction (when both exist),
//   2. word drop inside each textual cue,
//   3. whole-cue drop, resampled if every cue would disappear.
inline CueBundle augment(const CueBundle& bundle, const std::optional<std::string>& gt_prev,
                         const std::optional<std::string>& pred_prev,
                         const AugmentationConfig& cfg, Rng& rng,
                         AugmentStats* stats = nullptr) {
  cfg.validate();
  bundle.validate();

  std::optional<VisualFeatureSequence> vis = bundle.visual;
  std::optional<PseudoGlossSequence> pg = bundle.pseudo_glosses;
  std::optional<BackgroundDescription> bg = bundle.background;
  std::optional<std::string> prev = bundle.previous_text;

  // (1) previous-sentence source
  if (prev) {
    const std::optional<std::string>& gt = gt_prev ? gt_prev : bundle.previous_text;
    if (gt && pred_prev) {
      bool use_pred = rng.bernoulli(cfg.prev_pred_prob);
      if (stats) {
        ++stats->prev_choice_draws;
        if (use_pred) ++stats->prev_pred_chosen;
      }
      prev = use_pred ? pred_prev : gt;
    } else if (pred_prev) {
      prev = pred_prev;
    } else if (gt) {
      prev = gt;
    }
  }

  // (2) word drop on the textual cues (pg, prev, bg)
  auto record_fraction = [&](double f) {
    if (stats) {
      stats->retained_fraction_sum += f;
      ++stats->retained_fraction_count;
    }
  };
  if (pg && !pg->glosses.empty()) {
    std::vector<std::string> words = pg->words();
    std::vector<GlossEntry> entries = pg->glosses;
    const size_t before = words.size();
    if (cfg.word_drop_max > 0.0 && rng.bernoulli(cfg.word_drop_apply_prob)) {
      const double p = rng.uniform(0.0, cfg.word_drop_max);
      std::vector<GlossEntry> kept;
      for (auto& e : entries)
        if (!rng.bernoulli(p)) kept.push_back(std::move(e));
      // re-group: deleting words can create new adjacent duplicates
      std::vector<GlossEntry> grouped;
      for (auto& e : kept) {
        if (!grouped.empty() && grouped.back().word == e.word)
          grouped.back().confidence = std::max(grouped.back().confidence, e.confidence);
        else
          grouped.push_back(std::move(e));
      }
      record_fraction(double(kept.size()) / double(before));
      pg->glosses = std::move(grouped);
    } else {
      record_fraction(1.0);
    }
  }
  if (prev) {
    std::vector<std::string> words = split_whitespace(*prev);
    if (!words.empty()) {
      record_fraction(detail::drop_words(words, cfg.word_drop_max, cfg.word_drop_apply_prob, rng));
      prev = join(words, " ");
    }
  }
  if (bg && !bg->keywords.empty()) {
    record_fraction(
        detail::drop_words(bg->keywords, cfg.word_drop_max, cfg.word_drop_apply_prob, rng));
  }

  // (3) whole-cue drop; never let the mask go empty
  const bool present[4] = {vis.has_value(), pg.has_value(), prev.has_value(), bg.has_value()};
  bool drop[4];
  for (int attempt = 0;; ++attempt) {
    bool all_dropped = true;
    for (int c = 0; c < 4; ++c) {
      drop[c] = false;
      if (!present[c]) continue;
      drop[c] = rng.bernoulli(cfg.cue_drop_prob);
      if (stats) {
        ++stats->cue_draws[c];
        if (drop[c]) ++stats->cue_drops[c];
      }
      if (!drop[c]) all_dropped = false;
    }
    if (!all_dropped) break;
    if (stats) ++stats->empty_mask_resamples;
    if (attempt >= 64) {  // cue_drop_prob == 1 cannot resolve; keep the bundle
      for (int c = 0; c < 4; ++c) drop[c] = false;
      break;
    }
  }
  if (drop[0]) vis.reset();
  if (drop[1]) pg.reset();
  if (drop[2]) prev.reset();
  if (drop[3]) bg.reset();

  return CueBundle::make(std::move(vis), std::move(pg), std::move(bg), std::move(prev));
}

// Target-sentence word drop (small-corpus regime). Never empties the target.
inline std::string augment_target(const std::string& target, const AugmentationConfig& cfg,
                                  Rng& rng) {
  if (cfg.target_word_drop_max <= 0.0) return target;
  std::vector<std::string> words = split_whitespace(target);
  if (words.size() <= 1) return target;
  std::vector<std::string> kept = words;
  detail::drop_words(kept, cfg.target_word_drop_max, cfg.word_drop_apply_prob, rng);
  if (kept.empty()) return target;
  return join(kept, " ");
}

}  // namespace cslt
