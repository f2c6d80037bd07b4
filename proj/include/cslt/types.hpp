#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cslt/common.hpp"

namespace cslt {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatF = Mat<float>;

// ---------------------------------------------------------------------------
// The four cues and their carriers. All values are immutable after
// construction and safe to share across workers.

struct VisualFeatureSequence {
  MatF features;        // F x D, row per sliding-window feature
  int stride = 2;       // frames between window starts
  int window_len = 16;  // frames per window
  double fps = 25.0;

  int num_features() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }

  void validate() const {
    if (features.rows() < 1) throw DataError("feature sequence empty");
    if (stride < 1 || window_len < 1) throw DataError("non-positive window geometry");
    if (fps <= 0) throw DataError("non-positive fps");
    if (!features.allFinite()) throw DataError("non-finite feature entry");
  }
};

struct GlossEntry {
  std::string word;   // word or phrase from the classifier vocabulary
  double confidence = 0.0;
  int window_index = 0;
};

// Post-grouping form: no two adjacent entries share a word, indices increase.
struct PseudoGlossSequence {
  std::vector<GlossEntry> glosses;

  void validate() const {
    for (size_t i = 0; i < glosses.size(); ++i) {
      const auto& g = glosses[i];
      if (g.confidence < 0.0 || g.confidence > 1.0)
        throw DataError("gloss confidence outside [0,1]");
      if (i > 0) {
        if (glosses[i - 1].word == g.word)
          throw DataError("adjacent duplicate gloss after grouping");
        if (glosses[i - 1].window_index >= g.window_index)
          throw DataError("gloss window indices not strictly increasing");
      }
    }
  }

  std::vector<std::string> words() const {
    std::vector<std::string> out;
    out.reserve(glosses.size());
    for (const auto& g : glosses) out.push_back(g.word);
    return out;
  }
};

struct BackgroundDescription {
  std::vector<std::string> keywords;  // unique, lowercase, stopword-free
  int source_caption_count = 0;
};

struct SentenceRecord {
  std::string episode_id;
  int sentence_index = 0;
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::string gt_text;
  std::string feature_path;  // empty when absent
  std::string gloss_path;
  std::string caption_path;

  double duration() const { return end_sec - start_sec; }
  std::string sentence_id() const {
    return episode_id + ":" + std::to_string(sentence_index);
  }
};

inline std::string make_sentence_id(const std::string& episode_id, int index) {
  return episode_id + ":" + std::to_string(index);
}

// ---------------------------------------------------------------------------
// Cue mask, ordered (vid, pg, prev, bg).

struct CueMask {
  bool vid = false;
  bool pg = false;
  bool prev = false;
  bool bg = false;

  static CueMask all() { return {true, true, true, true}; }
  static CueMask none() { return {false, false, false, false}; }

  static CueMask from_bits(unsigned bits) {
    return {(bits & 1u) != 0, (bits & 2u) != 0, (bits & 4u) != 0, (bits & 8u) != 0};
  }
  unsigned bits() const {
    return (vid ? 1u : 0) | (pg ? 2u : 0) | (prev ? 4u : 0) | (bg ? 8u : 0);
  }

  int count() const { return int(vid) + int(pg) + int(prev) + int(bg); }
  bool any() const { return vid || pg || prev || bg; }

  bool subset_of(const CueMask& o) const {
    return (!vid || o.vid) && (!pg || o.pg) && (!prev || o.prev) && (!bg || o.bg);
  }

  CueMask intersect(const CueMask& o) const {
    return {vid && o.vid, pg && o.pg, prev && o.prev, bg && o.bg};
  }

  std::array<bool, 4> as_array() const { return {vid, pg, prev, bg}; }

  bool operator==(const CueMask& o) const {
    return vid == o.vid && pg == o.pg && prev == o.prev && bg == o.bg;
  }

  // Canonical text form, e.g. "vid,pg,prev,bg" or "vid" or "none".
  std::string to_string() const {
    std::vector<std::string> parts;
    if (vid) parts.push_back("vid");
    if (pg) parts.push_back("pg");
    if (prev) parts.push_back("prev");
    if (bg) parts.push_back("bg");
    return parts.empty() ? "none" : join(parts, ",");
  }

  static CueMask parse(std::string_view text) {
    CueMask m;
    if (trim(text) == "none") return m;
    for (const auto& tok : split_whitespace(to_lower(text))) {
      std::string t = tok;
      // accept comma-joined form too
      size_t pos = 0;
      while (pos < t.size()) {
        size_t comma = t.find(',', pos);
        std::string name = t.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        pos = comma == std::string::npos ? t.size() : comma + 1;
        if (name.empty()) continue;
        if (name == "vid") m.vid = true;
        else if (name == "pg") m.pg = true;
        else if (name == "prev") m.prev = true;
        else if (name == "bg") m.bg = true;
        else throw ConfigError("unknown cue name: " + name);
      }
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// CueBundle: the per-sentence model input. Mask bit i is true iff the
// corresponding field holds a value; at least one cue must be present.

struct CueBundle {
  std::optional<VisualFeatureSequence> visual;
  std::optional<PseudoGlossSequence> pseudo_glosses;
  std::optional<BackgroundDescription> background;
  std::optional<std::string> previous_text;
  CueMask cue_mask;

  void validate() const {
    if (cue_mask.vid != visual.has_value() || cue_mask.pg != pseudo_glosses.has_value() ||
        cue_mask.prev != previous_text.has_value() || cue_mask.bg != background.has_value())
      throw DataError("cue_mask inconsistent with present fields");
    if (!cue_mask.any()) throw DataError("cue bundle has no cues");
    if (visual) visual->validate();
    if (pseudo_glosses) pseudo_glosses->validate();
  }

  static CueBundle make(std::optional<VisualFeatureSequence> vis,
                        std::optional<PseudoGlossSequence> pg,
                        std::optional<BackgroundDescription> bg,
                        std::optional<std::string> prev) {
    CueBundle b;
    b.visual = std::move(vis);
    b.pseudo_glosses = std::move(pg);
    b.background = std::move(bg);
    b.previous_text = std::move(prev);
    b.cue_mask = {b.visual.has_value(), b.pseudo_glosses.has_value(),
                  b.previous_text.has_value(), b.background.has_value()};
    b.validate();
    return b;
  }

  // Returns a copy restricted to `mask`; cues absent from the bundle stay absent.
  CueBundle restricted(const CueMask& mask) const {
    return make(mask.vid ? visual : std::nullopt,
                mask.pg ? pseudo_glosses : std::nullopt,
                mask.bg ? background : std::nullopt,
                mask.prev ? previous_text : std::nullopt);
  }
};

// ---------------------------------------------------------------------------
// Generation output. prompt_transcript is the rendered segment list that
// produced the text; it makes episode chaining auditable.

struct TranslationHypothesis {
  std::string sentence_id;
  std::string text;
  CueMask cue_mask;
  std::string prompt_transcript;
  int token_count = 0;
  std::string prev_source;  // "pred" | "absent"
};

}  // namespace cslt
