#pragma once

// Shared miniature corpus used by the training/inference tests: real files on
// disk in the exact formats the loaders expect.

#include <filesystem>
#include <nlohmann/json.hpp>

#include "cslt/feature_io.hpp"
#include "cslt/manifest.hpp"
#include "cslt/model.hpp"

namespace cslt_test {

using namespace cslt;

struct MiniCorpus {
  std::filesystem::path dir;
  std::filesystem::path manifest_path;
  std::vector<std::string> all_texts;
};

inline MiniCorpus make_mini_corpus(const std::filesystem::path& dir, int num_episodes = 2,
                                   int sentences_per_episode = 3, int feat_dim = 6,
                                   uint64_t seed = 99) {
  namespace fs = std::filesystem;
  fs::remove_all(dir);
  fs::create_directories(dir / "features");

  const std::vector<std::vector<std::string>> sentence_words = {
      {"the", "farmer", "feeds", "the", "horse"},
      {"a", "dog", "runs", "fast"},
      {"they", "watch", "the", "river"},
      {"the", "horse", "eats", "grass"},
      {"rain", "falls", "on", "the", "field"},
      {"the", "dog", "sleeps"},
  };

  Rng rng(seed);
  MiniCorpus corpus;
  corpus.dir = dir;
  corpus.manifest_path = dir / "manifest.jsonl";

  std::ostringstream manifest;
  for (int e = 0; e < num_episodes; ++e) {
    std::string ep = "ep" + std::to_string(e);
    std::ostringstream gloss_rows, caption_rows;
    for (int t = 0; t < sentences_per_episode; ++t) {
      const auto& words = sentence_words[(e * sentences_per_episode + t) % sentence_words.size()];
      std::string text = join(words, " ");
      corpus.all_texts.push_back(text);

      double start = t * 4.0, end = start + 3.0;
      std::string sid = ep + ":" + std::to_string(t);

      // features: one row per word, tiny dim
      MatF feats(int(words.size()), feat_dim);
      for (int r = 0; r < feats.rows(); ++r)
        for (int c = 0; c < feat_dim; ++c) feats(r, c) = float(rng.gaussian());
      auto fpath = dir / "features" / (ep + "_" + std::to_string(t) + ".bin");
      write_feature_file(fpath, feats);

      // glosses: the content words with repeats
      nlohmann::json preds = nlohmann::json::array();
      int w_idx = 0;
      for (const auto& w : words) {
        preds.push_back({{"window_index", w_idx++}, {"word", w}, {"confidence", 0.8}});
        preds.push_back({{"window_index", w_idx++}, {"word", w}, {"confidence", 0.6}});
      }
      gloss_rows << nlohmann::json{{"sentence_id", sid}, {"preds", preds}}.dump() << "\n";

      caption_rows << nlohmann::json{{"episode_id", ep},
                                     {"time_sec", start + 1.0},
                                     {"caption", "a field with a " + words.back()}}
                          .dump()
                   << "\n";

      nlohmann::json rec{{"episode_id", ep},
                         {"sentence_index", t},
                         {"start_sec", start},
                         {"end_sec", end},
                         {"gt_text", text},
                         {"feature_path", fpath.string()},
                         {"gloss_path", (dir / (ep + "_gloss.jsonl")).string()},
                         {"caption_path", (dir / (ep + "_captions.jsonl")).string()}};
      manifest << rec.dump() << "\n";
    }
    write_text_file(dir / (ep + "_gloss.jsonl"), gloss_rows.str());
    write_text_file(dir / (ep + "_captions.jsonl"), caption_rows.str());
  }
  write_text_file(corpus.manifest_path, manifest.str());
  return corpus;
}

template <typename S>
TranslationModel<S> make_corpus_model(const MiniCorpus& corpus, int feat_dim = 6,
                                      TrainableMode mode = TrainableMode::full,
                                      std::optional<AdapterConfig> adapter = std::nullopt,
                                      uint64_t seed = 7) {
  auto tmpl = default_template();
  std::vector<std::string> texts = corpus.all_texts;
  texts.insert(texts.end(), {tmpl.instruction, tmpl.prev_prompt, tmpl.pg_prompt, tmpl.bg_prompt,
                             tmpl.vid_prompt, "field grass river"});
  DecoderSpec spec;
  spec.embed_dim = 16;
  spec.num_layers = 2;
  spec.num_heads = 2;
  spec.ff_dim = 24;
  spec.max_seq_len = 160;
  MappingNetworkConfig mc;
  mc.in_dim = feat_dim;
  mc.out_dim = 16;
  BuildOptions opts;
  opts.seed = seed;
  opts.mode = mode;
  return build_model<S>(spec, mc, adapter, WordTokenizer::build(texts), tmpl, opts);
}

}  // namespace cslt_test
