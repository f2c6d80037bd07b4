#pragma once

#include <thread>

#include "cslt/cue_extraction.hpp"
#include "cslt/manifest.hpp"
#include "cslt/model.hpp"

namespace cslt {

// Per-cue lenient attachment: an unreadable file degrades that cue to absent
// instead of failing the sentence. Returns nullopt when nothing is available.
inline std::optional<CueBundle> attach_cues_lenient(const SentenceRecord& record,
                                                    const std::optional<std::string>& prev_text,
                                                    const std::set<std::string>& stopwords,
                                                    std::vector<std::string>* warnings = nullptr) {
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(record.sentence_id() + ": " + msg);
  };

  std::optional<VisualFeatureSequence> visual;
  std::optional<PseudoGlossSequence> pg;
  std::optional<BackgroundDescription> bg;
  if (!record.feature_path.empty()) {
    try {
      visual = read_feature_file(record.feature_path);
    } catch (const DataError& e) {
      warn(e.what());
    }
  }
  if (!record.gloss_path.empty()) {
    try {
      pg = extract_pseudo_glosses(
          load_window_predictions(record.gloss_path, record.sentence_id()));
    } catch (const DataError& e) {
      warn(e.what());
    }
  }
  if (!record.caption_path.empty()) {
    try {
      bg = collate_background(load_captions(record.caption_path, record), stopwords);
    } catch (const DataError& e) {
      warn(e.what());
    }
  }
  if (!visual && !pg && !bg && !prev_text) return std::nullopt;
  return CueBundle::make(std::move(visual), std::move(pg), std::move(bg), prev_text);
}

// ---------------------------------------------------------------------------
// Single-sentence translation under an arbitrary non-empty cue subset.
template <typename S>
TranslationHypothesis translate_sentence(const TranslationModel<S>& model,
                                         const CueBundle& bundle,
                                         const DecodingConfig& decoding) {
  bundle.validate();
  auto segments = assemble(model.prompt_template(), bundle);
  const VisualFeatureSequence* feats = bundle.visual ? &*bundle.visual : nullptr;
  auto hyp = model.generate(segments, feats, decoding);
  hyp.cue_mask = bundle.cue_mask;
  hyp.prev_source = bundle.cue_mask.prev ? "pred" : "absent";
  return hyp;
}

// ---------------------------------------------------------------------------
// Episode-level autoregressive translation: each prediction becomes the next
// sentence's previous-sentence cue. Errors degrade the sentence to whatever
// cues remain and never abort the episode.
template <typename S>
std::vector<TranslationHypothesis> translate_episode(const TranslationModel<S>& model,
                                                     const Episode& episode,
                                                     const CueMask& cue_policy,
                                                     const DecodingConfig& decoding,
                                                     const std::set<std::string>& stopwords,
                                                     std::vector<std::string>* warnings = nullptr) {
  std::vector<TranslationHypothesis> out;
  std::string prev_prediction;  // empty means no usable previous text
  for (const auto& record : episode.sentences) {
    std::optional<std::string> prev;
    if (cue_policy.prev && !prev_prediction.empty()) prev = prev_prediction;

    TranslationHypothesis hyp;
    hyp.sentence_id = record.sentence_id();
    auto bundle = attach_cues_lenient(record, prev, stopwords, warnings);
    if (bundle) {
      try {
        hyp = translate_sentence(model, bundle->restricted(cue_policy), decoding);
        hyp.sentence_id = record.sentence_id();
      } catch (const std::exception& e) {
        if (warnings) warnings->push_back(record.sentence_id() + ": " + e.what());
        hyp.text.clear();
        hyp.cue_mask = CueMask::none();
      }
    } else if (warnings) {
      warnings->push_back(record.sentence_id() + ": no cues available");
    }
    hyp.prev_source = prev ? "pred" : "absent";
    prev_prediction = hyp.text;  // empty text drops the prev cue downstream
    out.push_back(std::move(hyp));
  }
  return out;
}

// Episodes are independent: parallel across episodes, strictly sequential
// within one. Results keep manifest order regardless of thread interleaving.
template <typename S>
std::vector<TranslationHypothesis> translate_corpus(const TranslationModel<S>& model,
                                                    const Manifest& manifest,
                                                    const CueMask& cue_policy,
                                                    const DecodingConfig& decoding,
                                                    const std::set<std::string>& stopwords,
                                                    int num_threads = 1,
                                                    std::vector<std::string>* warnings = nullptr) {
  const size_t n = manifest.episodes.size();
  std::vector<std::vector<TranslationHypothesis>> per_episode(n);
  std::vector<std::vector<std::string>> per_warnings(n);

  if (num_threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i)
      per_episode[i] = translate_episode(model, manifest.episodes[i], cue_policy, decoding,
                                         stopwords, warnings ? &per_warnings[i] : nullptr);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
        per_episode[i] = translate_episode(model, manifest.episodes[i], cue_policy, decoding,
                                           stopwords, warnings ? &per_warnings[i] : nullptr);
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(num_threads, int(n)); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<TranslationHypothesis> out;
  for (size_t i = 0; i < n; ++i) {
    for (auto& h : per_episode[i]) out.push_back(std::move(h));
    if (warnings)
      for (auto& w : per_warnings[i]) warnings->push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hypothesis JSONL: {"sentence_id", "text", "cue_mask": [vid,pg,prev,bg],
//                    "prev_source": "pred"|"absent"}

inline void save_hypotheses(const std::filesystem::path& path,
                            const std::vector<TranslationHypothesis>& hyps) {
  std::ostringstream out;
  for (const auto& h : hyps) {
    auto m = h.cue_mask.as_array();
    nlohmann::json j{{"sentence_id", h.sentence_id},
                     {"text", h.text},
                     {"cue_mask", {m[0], m[1], m[2], m[3]}},
                     {"prev_source", h.prev_source}};
    out << j.dump() << "\n";
  }
  write_text_file(path, out.str());
}

inline std::vector<TranslationHypothesis> load_hypotheses(const std::filesystem::path& path) {
  std::vector<TranslationHypothesis> hyps;
  for_each_line(path, [&](size_t lineno, const std::string& line) {
    try {
      auto j = nlohmann::json::parse(line);
      TranslationHypothesis h;
      h.sentence_id = j.at("sentence_id").get<std::string>();
      h.text = j.at("text").get<std::string>();
      auto m = j.at("cue_mask");
      h.cue_mask = {m.at(0).get<bool>(), m.at(1).get<bool>(), m.at(2).get<bool>(),
                    m.at(3).get<bool>()};
      h.prev_source = j.value("prev_source", "absent");
      hyps.push_back(std::move(h));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed hypothesis line " + std::to_string(lineno) + " in " +
                      path.string() + ": " + e.what());
    }
  });
  return hyps;
}

}  // namespace cslt
