#pragma once

#include <nlohmann/json.hpp>

#include "cslt/cue_extraction.hpp"
#include "cslt/feature_io.hpp"
#include "cslt/lexicon.hpp"
#include "cslt/manifest.hpp"

namespace cslt {

// Desk-scale corpus with known latent structure. Information is deliberately
// disentangled per cue:
//   * every sign has a fixed feature embedding; homonym reading pairs share
//     one embedding and are told apart only by a background keyword,
//   * run-opening sentences introduce a topic place word that later sentences
//     repeat (unsigned) while the carry chain holds, so only the previous
//     sentence can supply it,
//   * pseudo-glosses are the ground-truth signs corrupted by miss and
//     false-positive noise,
//   * captions carry the scene keyword associated with the object plus
//     distractors.

struct SyntheticNoise {
  double gloss_fp_rate = 0.08;    // per window
  double gloss_miss_rate = 0.08;  // per sign occurrence
  double caption_noise = 0.2;     // keyword replaced by a distractor
  double feature_noise = 0.7;     // occurrence-level embedding noise (sigma)
};

struct SyntheticConfig {
  int num_episodes = 25;
  int sentences_per_episode = 8;
  int vocab_size = 48;
  int homonym_pairs = 4;
  double topic_carry_prob = 0.75;
  SyntheticNoise noise;
  int feature_dim = 768;
  int window_len = 16;
  int stride = 2;
  double fps = 25.0;
  uint64_t seed = 0;
  double homonym_object_prob = 0.5;  // body sentences drawing a homonym reading
  int run_length = 4;                // sentences per topic run

  void validate() const;
};

namespace synth_bank {

inline const std::vector<std::string>& subjects() {
  static const std::vector<std::string> v = {
      "farmer", "teacher", "doctor", "sailor", "painter", "baker", "hunter", "dancer",
      "singer", "builder", "keeper", "gardener", "driver", "shepherd", "weaver"};
  return v;
}
inline const std::vector<std::string>& verbs_base() {
  static const std::vector<std::string> v = {
      "feed", "watch", "carry", "paint", "clean", "build", "follow", "greet",
      "help", "lift", "find", "chase", "teach", "guard", "draw"};
  return v;
}
inline const std::vector<std::string>& verbs_3sg() {
  static const std::vector<std::string> v = {
      "feeds", "watches", "carries", "paints", "cleans", "builds", "follows", "greets",
      "helps", "lifts", "finds", "chases", "teaches", "guards", "draws"};
  return v;
}
inline const std::vector<std::string>& objects() {
  static const std::vector<std::string> v = {
      "horse", "basket", "ladder", "boat", "kettle", "lantern", "wagon", "fence",
      "garden", "table", "mirror", "bucket", "blanket", "candle", "barrel", "statue",
      "bridge", "tower", "market", "orchard"};
  return v;
}
// scene keyword associated with each object (same index)
inline const std::vector<std::string>& scene_keywords() {
  static const std::vector<std::string> v = {
      "stable", "picnic", "roof", "sail", "tea", "light", "wheel", "gate",
      "flower", "chair", "glass", "well", "bed", "flame", "cellar", "stone",
      "river", "bell", "stall", "apple"};
  return v;
}
inline const std::vector<std::string>& topics() {
  static const std::vector<std::string> v = {
      "village", "harbor", "castle", "forest", "meadow", "island", "valley",
      "desert", "mountain", "abbey"};
  return v;
}
inline const std::vector<std::string>& distractors() {
  static const std::vector<std::string> v = {
      "sky", "cloud", "tree", "grass", "wall", "window", "door", "hill",
      "lamp", "barn", "fog", "pond", "moss", "dust", "mist"};
  return v;
}

}  // namespace synth_bank

inline void SyntheticConfig::validate() const {
  if (num_episodes < 1 || sentences_per_episode < 1)
    throw ConfigError("infeasible synthetic config: need at least one episode and sentence");
  if (homonym_pairs < 0) throw ConfigError("infeasible synthetic config: negative homonym_pairs");
  if (vocab_size < 2 * homonym_pairs)
    throw ConfigError("infeasible synthetic config: vocab_size < 2 * homonym_pairs");
  if (vocab_size < 8)
    throw ConfigError("infeasible synthetic config: vocab_size must be >= 8");
  if (feature_dim < 1 || window_len < 1 || stride < 1 || fps <= 0 || run_length < 1)
    throw ConfigError("infeasible synthetic config: bad geometry");
  for (double p : {topic_carry_prob, noise.gloss_fp_rate, noise.gloss_miss_rate,
                   noise.caption_noise, homonym_object_prob})
    if (p < 0.0 || p > 1.0)
      throw ConfigError("infeasible synthetic config: probability outside [0,1]");
  const long capacity = long(synth_bank::subjects().size()) + synth_bank::verbs_base().size() +
                        synth_bank::objects().size() + synth_bank::topics().size() + 1;
  if (vocab_size > capacity)
    throw ConfigError("infeasible synthetic config: vocab_size exceeds word bank capacity " +
                      std::to_string(capacity));
}

// Deterministic allocation of the sign vocabulary across word classes.
struct SynthVocab {
  int n_subjects = 0, n_verbs = 0, n_objects = 0, n_topics = 0;

  static SynthVocab allocate(const SyntheticConfig& cfg) {
    SynthVocab v;
    const int remaining = cfg.vocab_size - 1;  // "arrive" is always a sign
    v.n_objects = std::max(2 * cfg.homonym_pairs,
                           std::min<int>(int(synth_bank::objects().size()), remaining / 3));
    if (v.n_objects < 2) v.n_objects = 2;
    int left = remaining - v.n_objects;
    v.n_topics = std::min<int>(int(synth_bank::topics().size()), std::max(2, left / 5));
    left -= v.n_topics;
    v.n_verbs = std::min<int>(int(synth_bank::verbs_base().size()), std::max(2, left / 2));
    v.n_subjects = std::min<int>(int(synth_bank::subjects().size()), left - v.n_verbs);

    // spill any clamped remainder into classes with headroom
    auto total = [&] { return v.n_subjects + v.n_verbs + v.n_objects + v.n_topics + 1; };
    while (total() < cfg.vocab_size) {
      if (v.n_objects < int(synth_bank::objects().size())) ++v.n_objects;
      else if (v.n_topics < int(synth_bank::topics().size())) ++v.n_topics;
      else if (v.n_verbs < int(synth_bank::verbs_base().size())) ++v.n_verbs;
      else if (v.n_subjects < int(synth_bank::subjects().size())) ++v.n_subjects;
      else break;
    }
    if (v.n_subjects < 2 || v.n_verbs < 2 || v.n_topics < 1 || total() != cfg.vocab_size)
      throw ConfigError("infeasible synthetic config: cannot allocate vocab_size " +
                        std::to_string(cfg.vocab_size));
    return v;
  }
};

// ---------------------------------------------------------------------------
// Latent record per sentence: everything the oracle needs.

struct SyntheticLatent {
  std::string sentence_id;
  std::string gt_text;
  bool opener = false;
  std::string subject, verb_base, verb_surface;  // verb_* for body sentences
  std::string object;                            // reading actually used (body)
  bool object_is_homonym = false;
  std::string homonym_partner;
  bool kw_available = false;  // scene keyword survived caption noise
  int coin = 0;               // fair coin for unresolved homonym guessing
  std::string topic;
  bool topic_in_gt = false;   // opener or carried
  bool topic_signed = false;  // opener only
  std::vector<bool> sign_missed;  // pseudo-gloss miss flags per sign slot
};

// ---------------------------------------------------------------------------

struct SyntheticSummary {
  long num_sentences = 0;
  double mean_feature_rows = 0.0;
  long homonym_sentences = 0;
  long carried_sentences = 0;
};

namespace detail_synth {

inline MatF sign_embedding(const std::string& key, int dim, uint64_t seed) {
  Rng rng(derive_seed(seed, "sign_embedding:" + key, 0));
  MatF e(1, dim);
  double norm = 0.0;
  for (int i = 0; i < dim; ++i) {
    e(0, i) = float(rng.gaussian());
    norm += double(e(0, i)) * e(0, i);
  }
  e *= float(std::sqrt(double(dim)) / std::sqrt(norm));  // keep per-dim scale ~1
  return e;
}

}  // namespace detail_synth

class SyntheticCorpus {
 public:
  // Generates the corpus under out_dir: manifest.jsonl, features/, glosses/,
  // captions/, latent.jsonl, vocab.txt. Fully deterministic under cfg.seed.
  static SyntheticSummary generate(const SyntheticConfig& cfg,
                                   const std::filesystem::path& out_dir) {
    cfg.validate();
    const SynthVocab alloc = SynthVocab::allocate(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "features");
    fs::create_directories(out_dir / "glosses");
    fs::create_directories(out_dir / "captions");

    // sign name -> embedding key (homonym readings share their pair key)
    auto embedding_key = [&](const std::string& sign) -> std::string {
      const auto& objs = synth_bank::objects();
      for (int p = 0; p < cfg.homonym_pairs; ++p) {
        if (sign == objs[2 * p] || sign == objs[2 * p + 1])
          return "homonym_pair_" + std::to_string(p);
      }
      return sign;
    };

    // every word the corpus can emit anywhere
    std::set<std::string> vocab_words = {"the", "a", "at", "arrive", "arrives", "man",
                                         "standing", "near", "view", "beside", "of", "and", "in",
                                         "front"};
    for (int i = 0; i < alloc.n_subjects; ++i) vocab_words.insert(synth_bank::subjects()[i]);
    for (int i = 0; i < alloc.n_verbs; ++i) {
      vocab_words.insert(synth_bank::verbs_base()[i]);
      vocab_words.insert(synth_bank::verbs_3sg()[i]);
    }
    for (int i = 0; i < alloc.n_objects; ++i) {
      vocab_words.insert(synth_bank::objects()[i]);
      vocab_words.insert(synth_bank::scene_keywords()[i]);
    }
    for (int i = 0; i < alloc.n_topics; ++i) vocab_words.insert(synth_bank::topics()[i]);
    for (const auto& d : synth_bank::distractors()) vocab_words.insert(d);

    // sign vocabulary for gloss false positives (readings, not pair keys)
    std::vector<std::string> sign_words;
    for (int i = 0; i < alloc.n_subjects; ++i) sign_words.push_back(synth_bank::subjects()[i]);
    for (int i = 0; i < alloc.n_verbs; ++i) sign_words.push_back(synth_bank::verbs_base()[i]);
    for (int i = 0; i < alloc.n_objects; ++i) sign_words.push_back(synth_bank::objects()[i]);
    for (int i = 0; i < alloc.n_topics; ++i) sign_words.push_back(synth_bank::topics()[i]);
    sign_words.push_back("arrive");

    std::ostringstream manifest, latents;
    SyntheticSummary summary;
    double feat_rows_total = 0.0;

    for (int e = 0; e < cfg.num_episodes; ++e) {
      const std::string episode_id = "synth" + std::to_string(e);
      Rng ep_rng(derive_seed(cfg.seed, "episode:" + episode_id, 0));
      std::ostringstream gloss_rows, caption_rows;
      double clock_sec = 0.0;

      std::string topic;
      bool carry_alive = false;
      int run_pos = cfg.run_length;  // force a run start at t == 0

      for (int t = 0; t < cfg.sentences_per_episode; ++t) {
        SyntheticLatent latent;
        latent.sentence_id = make_sentence_id(episode_id, t);
        const bool opener = run_pos >= cfg.run_length;
        latent.opener = opener;

        std::vector<std::string> signs;          // sign identities (readings)
        std::vector<std::string> gloss_surface;  // classifier labels per sign
        if (opener) {
          run_pos = 0;
          topic = synth_bank::topics()[ep_rng.below(uint64_t(alloc.n_topics))];
          carry_alive = true;
          latent.subject = synth_bank::subjects()[ep_rng.below(uint64_t(alloc.n_subjects))];
          latent.topic = topic;
          latent.topic_in_gt = true;
          latent.topic_signed = true;
          latent.gt_text = "the " + latent.subject + " arrives at the " + topic;
          signs = {latent.subject, "arrive", topic};
        } else {
          if (carry_alive) carry_alive = ep_rng.bernoulli(cfg.topic_carry_prob);
          const int vi = int(ep_rng.below(uint64_t(alloc.n_verbs)));
          latent.subject = synth_bank::subjects()[ep_rng.below(uint64_t(alloc.n_subjects))];
          latent.verb_base = synth_bank::verbs_base()[vi];
          latent.verb_surface = synth_bank::verbs_3sg()[vi];

          const bool use_homonym =
              cfg.homonym_pairs > 0 && ep_rng.bernoulli(cfg.homonym_object_prob);
          if (use_homonym) {
            const int reading = int(ep_rng.below(uint64_t(2 * cfg.homonym_pairs)));
            latent.object = synth_bank::objects()[reading];
            latent.object_is_homonym = true;
            latent.homonym_partner = synth_bank::objects()[reading ^ 1];
            ++summary.homonym_sentences;
          } else {
            const int lo = 2 * cfg.homonym_pairs;
            latent.object =
                synth_bank::objects()[lo + int(ep_rng.below(uint64_t(alloc.n_objects - lo)))];
          }
          latent.topic = topic;
          latent.topic_in_gt = carry_alive;
          if (carry_alive) ++summary.carried_sentences;

          latent.gt_text = "the " + latent.subject + " " + latent.verb_surface + " the " +
                           latent.object;
          if (carry_alive) latent.gt_text += " at the " + topic;
          signs = {latent.subject, latent.verb_base, latent.object};
        }
        ++run_pos;
        latent.coin = int(ep_rng.below(2));

        // ---- timing and features
        std::vector<double> sign_secs(signs.size());
        double duration = 0.0;
        for (auto& s : sign_secs) {
          s = ep_rng.uniform(1.3, 1.7);
          duration += s;
        }
        const double start_sec = clock_sec;
        const double end_sec = start_sec + duration;
        clock_sec = end_sec + 0.5;

        const int frames = int(std::lround(duration * cfg.fps));
        auto window_starts = window_plan(frames, cfg.window_len, cfg.stride);
        const int F = int(window_starts.size());
        feat_rows_total += F;

        std::vector<double> boundaries(signs.size() + 1, 0.0);
        for (size_t s = 0; s < signs.size(); ++s)
          boundaries[s + 1] = boundaries[s] + sign_secs[s] * cfg.fps;

        auto window_sign = [&](int w) {
          const double mid = window_starts[w] + cfg.window_len / 2.0;
          for (size_t s = 0; s < signs.size(); ++s)
            if (mid < boundaries[s + 1]) return int(s);
          return int(signs.size()) - 1;
        };

        // occurrence-level noise vectors
        MatF features(F, cfg.feature_dim);
        std::vector<MatF> occ_noise(signs.size());
        for (size_t s = 0; s < signs.size(); ++s) {
          Rng occ_rng(derive_seed(cfg.seed, latent.sentence_id + ":occ:" + std::to_string(s), 0));
          occ_noise[s] = MatF::Zero(1, cfg.feature_dim);
          for (int d = 0; d < cfg.feature_dim; ++d)
            occ_noise[s](0, d) = float(occ_rng.gaussian() * cfg.noise.feature_noise);
        }
        Rng jitter_rng(derive_seed(cfg.seed, latent.sentence_id + ":jitter", 0));
        for (int w = 0; w < F; ++w) {
          const int s = window_sign(w);
          MatF base = detail_synth::sign_embedding(embedding_key(signs[s]), cfg.feature_dim,
                                                   cfg.seed);
          for (int d = 0; d < cfg.feature_dim; ++d)
            features(w, d) =
                base(0, d) + occ_noise[s](0, d) + float(jitter_rng.gaussian() * 0.05);
        }
        const auto feat_path =
            out_dir / "features" / (episode_id + "_" + std::to_string(t) + ".bin");
        write_feature_file(feat_path, features);

        // ---- pseudo-gloss windows
        Rng gloss_rng(derive_seed(cfg.seed, latent.sentence_id + ":gloss", 0));
        latent.sign_missed.resize(signs.size());
        for (size_t s = 0; s < signs.size(); ++s)
          latent.sign_missed[s] = gloss_rng.bernoulli(cfg.noise.gloss_miss_rate);
        gloss_surface = signs;

        nlohmann::json preds = nlohmann::json::array();
        for (int w = 0; w < F; ++w) {
          const int s = window_sign(w);
          if (latent.sign_missed[s]) continue;
          std::string word;
          if (gloss_rng.bernoulli(cfg.noise.gloss_fp_rate)) {
            word = sign_words[gloss_rng.below(sign_words.size())];
          } else if (signs[s] == latent.object && latent.object_is_homonym) {
            // the classifier cannot tell homonym readings apart
            word = gloss_rng.bernoulli(0.5) ? latent.object : latent.homonym_partner;
          } else {
            word = signs[s];
          }
          preds.push_back({{"window_index", w},
                           {"word", word},
                           {"confidence", gloss_rng.uniform(0.3, 0.95)}});
        }
        gloss_rows << nlohmann::json{{"sentence_id", latent.sentence_id}, {"preds", preds}}.dump()
                   << "\n";

        // ---- captions at ~1 fps
        Rng cap_rng(derive_seed(cfg.seed, latent.sentence_id + ":captions", 0));
        const int n_captions = std::max(2, int(std::lround(duration)));
        std::string scene_kw;
        if (!opener) {
          for (int i = 0; i < alloc.n_objects; ++i)
            if (synth_bank::objects()[i] == latent.object)
              scene_kw = synth_bank::scene_keywords()[i];
        }
        latent.kw_available = false;
        const auto& dis = synth_bank::distractors();
        for (int c = 0; c < n_captions; ++c) {
          std::string kw = scene_kw;
          if (!kw.empty() && cap_rng.bernoulli(cfg.noise.caption_noise))
            kw = dis[cap_rng.below(dis.size())];
          else if (!kw.empty())
            latent.kw_available = true;
          std::string caption;
          const std::string d1 = dis[cap_rng.below(dis.size())];
          const std::string d2 = dis[cap_rng.below(dis.size())];
          switch (int(cap_rng.below(3))) {
            case 0:
              caption = kw.empty() ? "a man standing near a " + d1
                                   : "a man standing near a " + kw;
              break;
            case 1:
              caption = kw.empty() ? "a view of a " + d1 + " and a " + d2
                                   : "a view of a " + d1 + " and a " + kw;
              break;
            default:
              caption = "a " + d1 + " beside a " + d2;
          }
          caption_rows << nlohmann::json{{"episode_id", episode_id},
                                         {"time_sec", start_sec + 0.5 + c},
                                         {"caption", caption}}
                              .dump()
                       << "\n";
        }

        // ---- manifest + latent rows
        nlohmann::json rec{
            {"episode_id", episode_id},
            {"sentence_index", t},
            {"start_sec", start_sec},
            {"end_sec", end_sec},
            {"gt_text", latent.gt_text},
            {"feature_path", feat_path.string()},
            {"gloss_path", (out_dir / "glosses" / (episode_id + ".jsonl")).string()},
            {"caption_path", (out_dir / "captions" / (episode_id + ".jsonl")).string()}};
        manifest << rec.dump() << "\n";

        nlohmann::json lj{{"sentence_id", latent.sentence_id},
                          {"gt", latent.gt_text},
                          {"opener", latent.opener},
                          {"subject", latent.subject},
                          {"verb_base", latent.verb_base},
                          {"verb_surface", latent.verb_surface},
                          {"object", latent.object},
                          {"object_is_homonym", latent.object_is_homonym},
                          {"homonym_partner", latent.homonym_partner},
                          {"kw_available", latent.kw_available},
                          {"coin", latent.coin},
                          {"topic", latent.topic},
                          {"topic_in_gt", latent.topic_in_gt},
                          {"topic_signed", latent.topic_signed},
                          {"sign_missed", latent.sign_missed}};
        latents << lj.dump() << "\n";
        ++summary.num_sentences;
      }
      write_text_file(out_dir / "glosses" / (episode_id + ".jsonl"), gloss_rows.str());
      write_text_file(out_dir / "captions" / (episode_id + ".jsonl"), caption_rows.str());
    }

    write_text_file(out_dir / "manifest.jsonl", manifest.str());
    write_text_file(out_dir / "latent.jsonl", latents.str());
    std::ostringstream vocab;
    for (const auto& w : vocab_words) vocab << w << "\n";
    write_text_file(out_dir / "vocab.txt", vocab.str());

    summary.mean_feature_rows =
        summary.num_sentences ? feat_rows_total / double(summary.num_sentences) : 0.0;
    return summary;
  }

  static std::vector<SyntheticLatent> load_latents(const std::filesystem::path& path) {
    std::vector<SyntheticLatent> out;
    for_each_line(path, [&](size_t, const std::string& line) {
      auto j = nlohmann::json::parse(line);
      SyntheticLatent l;
      l.sentence_id = j.at("sentence_id").get<std::string>();
      l.gt_text = j.at("gt").get<std::string>();
      l.opener = j.at("opener").get<bool>();
      l.subject = j.at("subject").get<std::string>();
      l.verb_base = j.at("verb_base").get<std::string>();
      l.verb_surface = j.at("verb_surface").get<std::string>();
      l.object = j.at("object").get<std::string>();
      l.object_is_homonym = j.at("object_is_homonym").get<bool>();
      l.homonym_partner = j.at("homonym_partner").get<std::string>();
      l.kw_available = j.at("kw_available").get<bool>();
      l.coin = j.at("coin").get<int>();
      l.topic = j.at("topic").get<std::string>();
      l.topic_in_gt = j.at("topic_in_gt").get<bool>();
      l.topic_signed = j.at("topic_signed").get<bool>();
      for (const auto& b : j.at("sign_missed")) l.sign_missed.push_back(b.get<bool>());
      out.push_back(std::move(l));
    });
    return out;
  }
};

// ---------------------------------------------------------------------------
// Information-theoretic best decode under a cue mask. Treats visual features
// as revealing sign identity up to homonym merging (an upper bound), uses the
// stored latent for gloss misses, keyword survival, and the homonym coin.

inline std::string oracle_translate(const SyntheticLatent& l, const CueMask& mask) {
  auto sign_known = [&](size_t slot) {
    const bool pg_has = mask.pg && slot < l.sign_missed.size() && !l.sign_missed[slot];
    return mask.vid || pg_has;
  };

  std::vector<std::string> words;
  words.push_back("the");
  if (l.opener) {
    if (sign_known(0)) words.push_back(l.subject);
    if (sign_known(1)) words.push_back("arrives");
    words.push_back("at");
    words.push_back("the");
    if (sign_known(2)) words.push_back(l.topic);
    return join(words, " ");
  }

  if (sign_known(0)) words.push_back(l.subject);
  if (sign_known(1)) words.push_back(l.verb_surface);
  words.push_back("the");

  const bool bg_reveals_object = mask.bg && l.kw_available;
  if (sign_known(2) || bg_reveals_object) {
    if (!l.object_is_homonym || bg_reveals_object) {
      words.push_back(l.object);
    } else {
      words.push_back(l.coin ? l.object : l.homonym_partner);
    }
  }
  if (l.topic_in_gt && mask.prev) {
    words.push_back("at");
    words.push_back("the");
    words.push_back(l.topic);
  }
  return join(words, " ");
}

inline double oracle_corpus_iou(const std::vector<SyntheticLatent>& latents, const CueMask& mask,
                                const Lexicon& lexicon) {
  if (latents.empty()) throw DataError("no latents");
  double sum = 0.0;
  for (const auto& l : latents) sum += iou_lemma_syn(oracle_translate(l, mask), l.gt_text, lexicon);
  return sum / double(latents.size());
}

}  // namespace cslt
