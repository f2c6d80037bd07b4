#include "cslt/augment.hpp"
#include "doctest.h"

using namespace cslt;

namespace {

CueBundle full_bundle() {
  VisualFeatureSequence vis;
  vis.features = MatF::Constant(6, 4, 0.5f);
  PseudoGlossSequence pg;
  pg.glosses = {{"good", 0.9, 0}, {"morning", 0.8, 2}, {"world", 0.7, 4},
                {"good", 0.6, 6}, {"news", 0.5, 8}};
  BackgroundDescription bg;
  bg.keywords = {"studio", "desk", "papers", "lights", "camera"};
  return CueBundle::make(vis, pg, bg, std::string("the broadcast started late tonight"));
}

}  // namespace

TEST_CASE("augment: all-zero config leaves the bundle unchanged") {
  auto bundle = full_bundle();
  AugmentationConfig cfg;
  cfg.word_drop_max = 0.0;
  cfg.cue_drop_prob = 0.0;
  cfg.prev_pred_prob = 0.0;
  Rng rng(5);
  auto out = augment(bundle, bundle.previous_text, std::string("a prediction"), cfg, rng);
  CHECK(out.cue_mask == CueMask::all());
  CHECK(out.pseudo_glosses->words() == bundle.pseudo_glosses->words());
  CHECK(*out.previous_text == *bundle.previous_text);
  CHECK(out.background->keywords == bundle.background->keywords);
}

TEST_CASE("augment: retained gloss count stays within [0, n]") {
  PseudoGlossSequence pg;
  for (int i = 0; i < 22; ++i)
    pg.glosses.push_back({"w" + std::to_string(i), 0.5, i});
  auto bundle = CueBundle::make(std::nullopt, pg, std::nullopt, std::nullopt);

  AugmentationConfig cfg;
  cfg.cue_drop_prob = 0.0;
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    auto out = augment(bundle, std::nullopt, std::nullopt, cfg, rng);
    REQUIRE(out.pseudo_glosses.has_value());
    REQUIRE(out.pseudo_glosses->glosses.size() <= 22);
  }
}

TEST_CASE("augment: word drop preserves relative order of survivors") {
  BackgroundDescription bg;
  bg.keywords = {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel"};
  auto bundle = CueBundle::make(std::nullopt, std::nullopt, bg, std::nullopt);
  AugmentationConfig cfg;
  cfg.cue_drop_prob = 0.0;
  cfg.word_drop_apply_prob = 1.0;
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    auto out = augment(bundle, std::nullopt, std::nullopt, cfg, rng);
    size_t pos = 0;
    for (const auto& w : out.background->keywords) {
      while (pos < bg.keywords.size() && bg.keywords[pos] != w) ++pos;
      REQUIRE(pos < bg.keywords.size());
      ++pos;
    }
  }
}

TEST_CASE("augment: gloss word drop re-groups new adjacent duplicates") {
  PseudoGlossSequence pg;
  pg.glosses = {{"a", 0.9, 0}, {"b", 0.8, 1}, {"a", 0.7, 2}, {"b", 0.6, 3}, {"a", 0.5, 4}};
  auto bundle = CueBundle::make(std::nullopt, pg, std::nullopt, std::nullopt);
  AugmentationConfig cfg;
  cfg.cue_drop_prob = 0.0;
  cfg.word_drop_apply_prob = 1.0;
  cfg.word_drop_max = 0.5;
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    auto out = augment(bundle, std::nullopt, std::nullopt, cfg, rng);
    // CueBundle::make validates, but assert explicitly for clarity
    const auto& g = out.pseudo_glosses->glosses;
    for (size_t i = 1; i < g.size(); ++i) REQUIRE(g[i].word != g[i - 1].word);
  }
}

TEST_CASE("augment: seed 1234 reproduces the frozen golden") {
  auto bundle = full_bundle();
  AugmentationConfig cfg;
  Rng rng(1234);
  auto out = augment(bundle, std::string("the broadcast started late tonight"),
                     std::string("broadcast began late"), cfg, rng);
  CHECK(out.cue_mask.to_string() == "pg,prev");
  CHECK(join(out.pseudo_glosses->words(), "|") == "good|morning|world|good|news");
  CHECK(*out.previous_text == "broadcast began late");

  auto out2 = augment(bundle, std::string("the broadcast started late tonight"),
                      std::string("broadcast began late"), cfg, rng);
  CHECK(out2.cue_mask.to_string() == "vid,prev");
  CHECK(*out2.previous_text == "broadcast began late");
}

TEST_CASE("augment statistics over 10k draws match the configured rates") {
  auto bundle = full_bundle();
  AugmentationConfig cfg;  // all paper defaults
  Rng rng(2024);
  AugmentStats stats;
  for (int i = 0; i < 10000; ++i) {
    auto out = augment(bundle, std::string("the broadcast started late tonight"),
                       std::string("broadcast began late"), cfg, rng, &stats);
    REQUIRE(out.cue_mask.any());  // empty mask never observed
  }
  for (int c = 0; c < 4; ++c) {
    INFO("cue ", c, " rate ", stats.cue_drop_rate(c));
    CHECK(stats.cue_drop_rate(c) > 0.48);
    CHECK(stats.cue_drop_rate(c) < 0.52);
  }
  CHECK(stats.prev_pred_rate() > 0.48);
  CHECK(stats.prev_pred_rate() < 0.52);
  CHECK(stats.mean_retained_fraction() > 0.855);
  CHECK(stats.mean_retained_fraction() < 0.895);
  CHECK(stats.empty_mask_resamples > 0);  // 1/16 of draws hit the resample path
}

TEST_CASE("augment: prev payload prefers the available source") {
  auto bundle = full_bundle();
  AugmentationConfig cfg;
  cfg.cue_drop_prob = 0.0;
  cfg.word_drop_max = 0.0;

  Rng rng(3);
  // only gt available
  auto g = augment(bundle, std::string("gt text"), std::nullopt, cfg, rng);
  CHECK(*g.previous_text == "gt text");
  // only prediction available
  auto p = augment(bundle, std::nullopt, std::string("pred text"), cfg, rng);
  CHECK(*p.previous_text == "pred text");
  // neither: keeps the bundle text
  auto k = augment(bundle, std::nullopt, std::nullopt, cfg, rng);
  CHECK(*k.previous_text == *bundle.previous_text);
}

TEST_CASE("augment_target never empties the target") {
  AugmentationConfig cfg;
  cfg.target_word_drop_max = 0.2;
  Rng rng(8);
  const std::string target = "they walked home across the bridge";
  for (int i = 0; i < 500; ++i) {
    auto out = augment_target(target, cfg, rng);
    REQUIRE_FALSE(out.empty());
    auto words = split_whitespace(out);
    REQUIRE(words.size() >= 1);
    REQUIRE(words.size() <= 6);
  }
  cfg.target_word_drop_max = 0.0;
  CHECK(augment_target(target, cfg, rng) == target);
}

TEST_CASE("augment config validation") {
  AugmentationConfig cfg;
  cfg.cue_drop_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
