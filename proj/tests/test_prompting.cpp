#include <set>

#include "cslt/prompting.hpp"
#include "doctest.h"

using namespace cslt;

namespace {

CueBundle full_bundle() {
  VisualFeatureSequence vis;
  vis.features = MatF::Constant(5, 8, 0.1f);
  PseudoGlossSequence pg;
  pg.glosses = {{"roman", 0.8, 0}, {"many", 0.6, 2}, {"god", 0.7, 5}};
  BackgroundDescription bg;
  bg.keywords = {"temple", "statue"};
  return CueBundle::make(vis, pg, bg, std::string("They built an empire."));
}

size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  size_t count = 0, pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("default template carries the published prompt strings") {
  auto t = default_template();
  CHECK(t.instruction ==
        "You are an AI assistant designed to interpret a video of a sign language signing "
        "sequence and translate it into English.");
  CHECK(t.prev_prompt == "The previous context is the following:");
  CHECK(t.pg_prompt == "The following are some possible words present in the sentence:");
  CHECK(t.bg_prompt == "Description of the background is:");
  CHECK(t.vid_prompt == "The following are the video tokens:");

  std::set<Cue> order(t.cue_order.begin(), t.cue_order.end());
  CHECK(order.size() == 4);
  CHECK(t.cue_order == std::array<Cue, 4>{Cue::prev, Cue::pg, Cue::bg, Cue::vid});
}

TEST_CASE("assemble: full mask yields instruction plus prompt/payload per cue") {
  auto segs = assemble(default_template(), full_bundle());
  REQUIRE(segs.size() == 9);
  CHECK(segs[0].text == default_template().instruction);
  CHECK(segs[1].text == default_template().prev_prompt);
  CHECK(segs[2].text == "They built an empire.");
  CHECK(segs[3].text == default_template().pg_prompt);
  CHECK(segs[4].text == "roman, many, god");
  CHECK(segs[5].text == default_template().bg_prompt);
  CHECK(segs[6].text == "temple, statue");
  CHECK(segs[7].text == default_template().vid_prompt);
  CHECK(segs[8].kind == PromptSegment::Kind::visual_span);
  CHECK(segs[8].visual_len == 5);
}

TEST_CASE("assemble: vid-only mask yields three segments") {
  auto bundle = full_bundle().restricted(CueMask::parse("vid"));
  auto segs = assemble(default_template(), bundle);
  REQUIRE(segs.size() == 3);
  CHECK(segs[1].text == default_template().vid_prompt);
  CHECK(segs[2].visual_len == 5);
}

TEST_CASE("dropping a cue removes exactly its prompt and payload") {
  auto tmpl = default_template();
  auto base = assemble(tmpl, full_bundle());
  for (const char* name : {"pg", "prev", "bg", "vid"}) {
    CueMask mask = CueMask::all();
    if (std::string(name) == "pg") mask.pg = false;
    if (std::string(name) == "prev") mask.prev = false;
    if (std::string(name) == "bg") mask.bg = false;
    if (std::string(name) == "vid") mask.vid = false;
    auto segs = assemble(tmpl, full_bundle().restricted(mask));
    CHECK(segs.size() == base.size() - 2);
    // remaining segments appear in the same relative order as in the full assembly
    size_t bi = 0;
    for (const auto& seg : segs) {
      while (bi < base.size() &&
             !(base[bi].kind == seg.kind && base[bi].text == seg.text &&
               base[bi].visual_len == seg.visual_len))
        ++bi;
      REQUIRE(bi < base.size());
      ++bi;
    }
  }
}

TEST_CASE("assemble is injective over cue masks; prompts appear exactly once") {
  auto tmpl = default_template();
  auto bundle = full_bundle();
  std::set<std::string> transcripts;
  for (unsigned bits = 1; bits < 16; ++bits) {
    auto segs = assemble(tmpl, bundle.restricted(CueMask::from_bits(bits)));
    transcripts.insert(render_transcript(segs));
  }
  CHECK(transcripts.size() == 15);

  auto full_text = render_transcript(assemble(tmpl, bundle));
  CHECK(count_occurrences(full_text, tmpl.instruction) == 1);
  CHECK(count_occurrences(full_text, tmpl.prev_prompt) == 1);
  CHECK(count_occurrences(full_text, tmpl.pg_prompt) == 1);
  CHECK(count_occurrences(full_text, tmpl.bg_prompt) == 1);
  CHECK(count_occurrences(full_text, tmpl.vid_prompt) == 1);
}

TEST_CASE("template validation") {
  auto t = default_template();
  t.pg_prompt.clear();
  CHECK_THROWS_AS(t.validate(), ConfigError);

  auto t2 = default_template();
  t2.cue_order = {Cue::prev, Cue::prev, Cue::bg, Cue::vid};
  CHECK_THROWS_AS(t2.validate(), ConfigError);
}

TEST_CASE("custom cue order is honored") {
  auto t = default_template();
  t.cue_order = {Cue::vid, Cue::bg, Cue::pg, Cue::prev};
  auto segs = assemble(t, full_bundle());
  REQUIRE(segs.size() == 9);
  CHECK(segs[1].text == t.vid_prompt);
  CHECK(segs[3].text == t.bg_prompt);
  CHECK(segs[5].text == t.pg_prompt);
  CHECK(segs[7].text == t.prev_prompt);
}
