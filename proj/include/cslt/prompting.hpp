#pragma once

#include <array>
#include <string>
#include <vector>

#include "cslt/types.hpp"

namespace cslt {

enum class Cue { prev, pg, bg, vid };

inline const char* cue_name(Cue c) {
  switch (c) {
    case Cue::prev: return "prev";
    case Cue::pg: return "pg";
    case Cue::bg: return "bg";
    case Cue::vid: return "vid";
  }
  return "?";
}

inline Cue parse_cue(std::string_view name) {
  if (name == "prev") return Cue::prev;
  if (name == "pg") return Cue::pg;
  if (name == "bg") return Cue::bg;
  if (name == "vid") return Cue::vid;
  throw ConfigError("unknown cue: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Prompt segments: the decoder input is a single sequence of text pieces and
// one visual-feature placeholder span.

struct PromptSegment {
  enum class Kind { text, visual_span };
  Kind kind = Kind::text;
  std::string text;    // set iff kind == text
  int visual_len = 0;  // set iff kind == visual_span

  static PromptSegment make_text(std::string t) {
    PromptSegment s;
    s.kind = Kind::text;
    s.text = std::move(t);
    return s;
  }
  static PromptSegment make_visual(int len) {
    PromptSegment s;
    s.kind = Kind::visual_span;
    s.visual_len = len;
    return s;
  }
};

struct PromptTemplate {
  std::string instruction;
  std::string prev_prompt;
  std::string pg_prompt;
  std::string bg_prompt;
  std::string vid_prompt;
  std::array<Cue, 4> cue_order{Cue::prev, Cue::pg, Cue::bg, Cue::vid};

  const std::string& prompt_for(Cue c) const {
    switch (c) {
      case Cue::prev: return prev_prompt;
      case Cue::pg: return pg_prompt;
      case Cue::bg: return bg_prompt;
      case Cue::vid: return vid_prompt;
    }
    return instruction;  // unreachable
  }

  void validate() const {
    if (instruction.empty() || prev_prompt.empty() || pg_prompt.empty() || bg_prompt.empty() ||
        vid_prompt.empty())
      throw ConfigError("prompt template strings must be non-empty");
    unsigned seen = 0;
    for (Cue c : cue_order) seen |= 1u << static_cast<unsigned>(c);
    if (seen != 0xF) throw ConfigError("cue_order must be a permutation of prev,pg,bg,vid");
  }
};

inline PromptTemplate default_template() {
  PromptTemplate t;
  t.instruction =
      "You are an AI assistant designed to interpret a video of a sign language "
      "signing sequence and translate it into English.";
  t.prev_prompt = "The previous context is the following:";
  t.pg_prompt = "The following are some possible words present in the sentence:";
  t.bg_prompt = "Description of the background is:";
  t.vid_prompt = "The following are the video tokens:";
  t.cue_order = {Cue::prev, Cue::pg, Cue::bg, Cue::vid};
  return t;
}

// ---------------------------------------------------------------------------
// assemble: instruction first, then for each cue in template order that is
// present in the bundle, its prompt segment followed by its payload segment.
// A dropped cue contributes nothing, including its prompt.

inline std::vector<PromptSegment> assemble(const PromptTemplate& tmpl, const CueBundle& bundle) {
  tmpl.validate();
  bundle.validate();

  std::vector<PromptSegment> segments;
  segments.push_back(PromptSegment::make_text(tmpl.instruction));

  for (Cue c : tmpl.cue_order) {
    switch (c) {
      case Cue::prev:
        if (bundle.cue_mask.prev) {
          segments.push_back(PromptSegment::make_text(tmpl.prev_prompt));
          segments.push_back(PromptSegment::make_text(*bundle.previous_text));
        }
        break;
      case Cue::pg:
        if (bundle.cue_mask.pg) {
          segments.push_back(PromptSegment::make_text(tmpl.pg_prompt));
          segments.push_back(PromptSegment::make_text(join(bundle.pseudo_glosses->words(), ", ")));
        }
        break;
      case Cue::bg:
        if (bundle.cue_mask.bg) {
          segments.push_back(PromptSegment::make_text(tmpl.bg_prompt));
          segments.push_back(PromptSegment::make_text(join(bundle.background->keywords, ", ")));
        }
        break;
      case Cue::vid:
        if (bundle.cue_mask.vid) {
          segments.push_back(PromptSegment::make_text(tmpl.vid_prompt));
          segments.push_back(PromptSegment::make_visual(bundle.visual->num_features()));
        }
        break;
    }
  }
  return segments;
}

// Rendered text form used for transcripts and golden fixtures: every segment
// is followed by a single newline; visual spans render as "<visual:F>".
inline std::string render_transcript(const std::vector<PromptSegment>& segments) {
  std::string out;
  for (const auto& seg : segments) {
    if (seg.kind == PromptSegment::Kind::text)
      out += seg.text;
    else
      out += "<visual:" + std::to_string(seg.visual_len) + ">";
    out += "\n";
  }
  return out;
}

}  // namespace cslt
