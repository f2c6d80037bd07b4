#pragma once

#include <nlohmann/json.hpp>
#include <set>
#include <unordered_set>

#include "cslt/feature_io.hpp"
#include "cslt/types.hpp"

namespace cslt {

// ---------------------------------------------------------------------------
// Upstream model outputs

struct WindowPrediction {
  int window_index = 0;
  std::string top1_word;
  double confidence = 0.0;
};

struct CaptionEntry {
  double time_sec = 0.0;
  std::string caption;
};

// ---------------------------------------------------------------------------
// Sliding-window plan over a frame sequence.
//
// Starts run 0, s, 2s, ... while start + window_len <= num_frames. When the
// arithmetic sequence leaves a tail of uncovered frames, one extra window is
// snapped to the clip end so every frame index < num_frames is covered.
// Clips shorter than the window get a single window at 0; consumers pad by
// repeating the last frame.
inline std::vector<int> window_plan(int num_frames, int window_len, int stride) {
  if (num_frames < 1 || window_len < 1 || stride < 1)
    throw DataError("window_plan requires positive arguments");
  std::vector<int> starts;
  if (num_frames < window_len) {
    starts.push_back(0);
    return starts;
  }
  for (int s = 0; s + window_len <= num_frames; s += stride) starts.push_back(s);
  if (starts.back() + window_len < num_frames) starts.push_back(num_frames - window_len);
  return starts;
}

// ---------------------------------------------------------------------------
// Pseudo-glosses: repetition grouping only, no confidence thresholding.
// Adjacent runs of the same word collapse to one entry keeping the run's
// maximum confidence and first window index.
inline PseudoGlossSequence extract_pseudo_glosses(const std::vector<WindowPrediction>& preds) {
  for (size_t i = 1; i < preds.size(); ++i)
    if (preds[i].window_index <= preds[i - 1].window_index)
      throw DataError("window predictions not ordered by window_index");

  PseudoGlossSequence out;
  for (const auto& p : preds) {
    if (!out.glosses.empty() && out.glosses.back().word == p.top1_word) {
      out.glosses.back().confidence = std::max(out.glosses.back().confidence, p.confidence);
    } else {
      out.glosses.push_back({p.top1_word, p.confidence, p.window_index});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Background collation: lowercase, split on any non-alphanumeric character,
// drop stopwords, dedupe keeping first-occurrence order.

inline std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::set<std::string> words;
  for_each_line(path, [&](size_t, const std::string& line) { words.insert(to_lower(trim(line))); });
  return words;
}

inline std::set<std::string> default_stopwords() {
  return load_stopwords(default_data_dir() / "stopwords.txt");
}

inline std::vector<std::string> tokenize_caption(const std::string& caption) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : to_lower(caption)) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline BackgroundDescription collate_background(const std::vector<CaptionEntry>& captions,
                                                const std::set<std::string>& stopwords) {
  BackgroundDescription bg;
  bg.source_caption_count = static_cast<int>(captions.size());
  std::unordered_set<std::string> seen;
  for (const auto& entry : captions) {
    for (auto& word : tokenize_caption(entry.caption)) {
      if (stopwords.count(word)) continue;
      if (seen.insert(word).second) bg.keywords.push_back(word);
    }
  }
  return bg;
}

// ---------------------------------------------------------------------------
// File formats feeding the cues.
//
// Gloss JSONL: {"sentence_id": str, "preds": [{"window_index": int,
//               "word": str, "confidence": float}]}
// Caption JSONL: {"episode_id": str, "time_sec": float, "caption": str};
//               sentences claim captions by time containment.

inline std::vector<WindowPrediction> load_window_predictions(
    const std::filesystem::path& path, const std::string& sentence_id) {
  using nlohmann::json;
  std::vector<WindowPrediction> preds;
  bool found = false;
  for_each_line(path, [&](size_t lineno, const std::string& line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed gloss line " + std::to_string(lineno) + " in " + path.string() +
                      ": " + e.what());
    }
    if (j.at("sentence_id").get<std::string>() != sentence_id) return;
    found = true;
    for (const auto& p : j.at("preds")) {
      preds.push_back({p.at("window_index").get<int>(), p.at("word").get<std::string>(),
                       p.at("confidence").get<double>()});
    }
  });
  if (!found)
    throw DataError("no gloss entry for " + sentence_id + " in " + path.string());
  return preds;
}

inline std::vector<CaptionEntry> load_captions(const std::filesystem::path& path,
                                               const SentenceRecord& record) {
  using nlohmann::json;
  std::vector<CaptionEntry> captions;
  for_each_line(path, [&](size_t lineno, const std::string& line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed caption line " + std::to_string(lineno) + " in " + path.string() +
                      ": " + e.what());
    }
    if (j.at("episode_id").get<std::string>() != record.episode_id) return;
    double t = j.at("time_sec").get<double>();
    if (t < record.start_sec || t > record.end_sec) return;
    captions.push_back({t, j.at("caption").get<std::string>()});
  });
  return captions;
}

// ---------------------------------------------------------------------------
// attach_cues: resolve a record's file references into a CueBundle. The cue
// mask reflects what was actually available; prev is present iff given.

inline CueBundle attach_cues(const SentenceRecord& record,
                             const std::optional<std::string>& prev_text,
                             const std::set<std::string>& stopwords) {
  std::optional<VisualFeatureSequence> visual;
  std::optional<PseudoGlossSequence> pg;
  std::optional<BackgroundDescription> bg;

  if (!record.feature_path.empty()) visual = read_feature_file(record.feature_path);
  if (!record.gloss_path.empty())
    pg = extract_pseudo_glosses(load_window_predictions(record.gloss_path, record.sentence_id()));
  if (!record.caption_path.empty())
    bg = collate_background(load_captions(record.caption_path, record), stopwords);

  return CueBundle::make(std::move(visual), std::move(pg), std::move(bg), prev_text);
}

}  // namespace cslt
