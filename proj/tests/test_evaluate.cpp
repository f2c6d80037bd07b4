#include "cslt/evaluate.hpp"

#include "doctest.h"

using namespace cslt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Manifest manifest_from_texts(const std::vector<std::string>& texts) {
  Manifest m;
  Episode ep;
  ep.episode_id = "ep0";
  for (size_t i = 0; i < texts.size(); ++i) {
    SentenceRecord rec;
    rec.episode_id = "ep0";
    rec.sentence_index = int(i);
    rec.start_sec = double(i) * 4.0;
    rec.end_sec = rec.start_sec + 3.0;
    rec.gt_text = texts[i];
    ep.sentences.push_back(rec);
  }
  m.episodes.push_back(std::move(ep));
  return m;
}

std::vector<TranslationHypothesis> hyps_from_texts(const std::vector<std::string>& texts) {
  std::vector<TranslationHypothesis> out;
  for (size_t i = 0; i < texts.size(); ++i) {
    TranslationHypothesis h;
    h.sentence_id = "ep0:" + std::to_string(i);
    h.text = texts[i];
    h.cue_mask = CueMask::all();
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace

TEST_CASE("evaluate_corpus: ground truth as hypotheses scores perfectly") {
  std::vector<std::string> texts = {"the farmer feeds the horse", "a dog runs across the field",
                                    "the keeper lights the lantern"};
  auto manifest = manifest_from_texts(texts);
  auto lex = Lexicon::load_default();
  auto report = evaluate_corpus(hyps_from_texts(texts), manifest, lex);
  CHECK(report.corpus.b4 == doctest::Approx(100.0));
  CHECK(report.corpus.rouge_l == doctest::Approx(1.0));
  CHECK(report.corpus.iou_mean == doctest::Approx(1.0));
  REQUIRE(report.corpus.cider.has_value());
  CHECK(*report.corpus.cider == doctest::Approx(10.0).epsilon(1e-3));
  CHECK(report.per_sentence.size() == 3);
}

TEST_CASE("evaluate_corpus: empty set and orphan ids are errors") {
  auto manifest = manifest_from_texts({"a", "b"});
  auto lex = Lexicon::from_tables({}, {});
  CHECK_THROWS_AS(evaluate_corpus({}, manifest, lex), DataError);

  auto hyps = hyps_from_texts({"a", "b"});
  hyps[1].sentence_id = "ep9:4";
  try {
    evaluate_corpus(hyps, manifest, lex);
    FAIL("expected orphan error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ep9:4") != std::string::npos);
  }
}

TEST_CASE("evaluate_corpus: calibration pairs through a score-echo judge give 29/12") {
  const auto& pairs = default_calibration_pairs();
  std::vector<std::string> refs, cands;
  for (const auto& p : pairs) {
    refs.push_back(p.reference);
    cands.push_back(p.candidate);
  }
  auto manifest = manifest_from_texts(refs);
  auto hyps = hyps_from_texts(cands);

  // stub judge: look the reference up in the calibration table and echo its score
  auto transport = [&](const std::string& body) -> HttpResult {
    auto j = json::parse(body);
    std::string last = j["messages"].back()["content"].get<std::string>();
    for (const auto& p : default_calibration_pairs()) {
      if (last.find("Reference Sentence: " + p.reference + "\n") != std::string::npos) {
        json content{{"score", p.score}, {"reason", p.reason}};
        return {200, json{{"choices", {{{"message", {{"content", content.dump()}}}}}}}.dump()};
      }
    }
    return {500, "unknown pair"};
  };

  EvalOptions opts;
  opts.judge_cfg = JudgeConfig{};
  opts.judge_cfg->endpoint = "stub";
  opts.judge_cfg->retry.backoff_ms = 1;
  opts.judge_transport = transport;

  auto lex = Lexicon::load_default();
  auto report = evaluate_corpus(hyps, manifest, lex, opts);
  REQUIRE(report.corpus.llm_mean.has_value());
  CHECK(*report.corpus.llm_mean == doctest::Approx(29.0 / 12.0).epsilon(1e-12));
  CHECK(report.corpus.llm_failures == 0);
  for (const auto& row : report.per_sentence) {
    REQUIRE(row.llm_score.has_value());
    CHECK(*row.llm_score >= 0.0);
    CHECK(*row.llm_score <= 5.0);
    CHECK_FALSE(row.llm_reason.empty());
  }
}

TEST_CASE("evaluate_corpus: external scorer plug-in contract") {
  std::vector<std::string> texts = {"one two three", "four five", "six seven eight nine"};
  auto manifest = manifest_from_texts(texts);
  auto lex = Lexicon::from_tables({}, {});
  EvalOptions opts;
  opts.external_scorers["wordcount"] =
      "python3 -c \"import sys,json\n"
      "for line in sys.stdin:\n"
      "    print(json.dumps({'score': float(len(json.loads(line)['candidate'].split()))}))\"";
  auto report = evaluate_corpus(hyps_from_texts(texts), manifest, lex, opts);
  CHECK(report.per_sentence[0].external_scores["wordcount"] == doctest::Approx(3.0));
  CHECK(report.per_sentence[1].external_scores["wordcount"] == doctest::Approx(2.0));
  CHECK(report.per_sentence[2].external_scores["wordcount"] == doctest::Approx(4.0));
  CHECK(report.corpus.external_means["wordcount"] == doctest::Approx(3.0));
}

TEST_CASE("report JSON and CSV serialization round-trip") {
  std::vector<std::string> texts = {"the cat sat", "a dog ran"};
  auto manifest = manifest_from_texts(texts);
  auto lex = Lexicon::from_tables({}, {});
  EvalOptions opts;
  opts.sentence_bleu = true;
  auto report = evaluate_corpus(hyps_from_texts({"the cat sat", "a dog walked"}), manifest, lex,
                                opts);

  auto j = report_to_json(report);
  auto back = report_from_json(j);
  CHECK(back.corpus.b4 == report.corpus.b4);
  CHECK(back.corpus.iou_mean == report.corpus.iou_mean);
  CHECK(back.per_sentence.size() == report.per_sentence.size());
  CHECK(back.per_sentence[0].b4.has_value());

  auto csv = report_to_csv(report);
  CHECK(csv.find("sentence_id,rouge_l,iou,b4") == 0);
  CHECK(csv.find("ep0:0") != std::string::npos);

  // quoting: a reason with commas survives
  report.per_sentence[0].llm_score = 3.0;
  report.per_sentence[0].llm_reason = "shares 'cat', 'sat'; close";
  auto csv2 = report_to_csv(report);
  CHECK(csv2.find("\"shares 'cat', 'sat'; close\"") != std::string::npos);
}

TEST_CASE("correlation_report: pairwise matrix with undefined cells") {
  std::map<std::string, std::vector<double>> cols;
  cols["iou"] = {0.1, 0.5, 0.9, 0.3, 0.7};
  cols["llm"] = {0.0, 2.0, 5.0, 1.0, 4.0};
  cols["flat"] = {1.0, 1.0, 1.0, 1.0, 1.0};
  auto matrix = correlation_report(cols);
  CHECK(*matrix["iou"]["iou"].pearson == doctest::Approx(1.0));
  CHECK(*matrix["iou"]["llm"].pearson == doctest::Approx(*matrix["llm"]["iou"].pearson));
  CHECK(*matrix["iou"]["llm"].spearman == doctest::Approx(1.0));  // monotone
  CHECK_FALSE(matrix["flat"]["iou"].pearson.has_value());

  auto j = correlation_to_json(matrix);
  CHECK(j["flat"]["iou"]["pearson"].is_null());
  CHECK(j["iou"]["llm"]["pearson"].is_number());

  cols["short"] = {1.0, 2.0};
  CHECK_THROWS_AS(correlation_report(cols), DataError);
}
