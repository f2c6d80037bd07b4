#pragma once

#include <set>
#include <unistd.h>

#include "cslt/inference.hpp"
#include "cslt/judge.hpp"
#include "cslt/lexicon.hpp"
#include "cslt/manifest.hpp"
#include "cslt/metrics.hpp"

namespace cslt {

struct PerSentenceScores {
  std::string sentence_id;
  std::optional<double> b4;  // smoothed sentence BLEU, behind a flag
  double rouge_l = 0.0;
  double iou = 0.0;
  std::optional<double> llm_score;
  std::string llm_reason;
  bool llm_failed = false;
  std::map<std::string, double> external_scores;
};

struct CorpusScores {
  double b4 = 0.0;
  double rouge_l = 0.0;
  std::optional<double> cider;  // needs >= 2 documents
  double iou_mean = 0.0;
  std::optional<double> llm_mean;
  long llm_failures = 0;
  std::map<std::string, double> external_means;
};

struct MetricReport {
  std::vector<PerSentenceScores> per_sentence;
  CorpusScores corpus;
};

struct EvalOptions {
  bool sentence_bleu = false;
  IouOptions iou;
  std::map<std::string, std::string> external_scorers;  // name -> command
  std::optional<JudgeConfig> judge_cfg;
  JudgeTransport judge_transport;  // required when judge_cfg is set
};

// ---------------------------------------------------------------------------
// External-scorer plug-in: a subprocess reading JSONL {candidate, reference}
// on stdin and writing JSONL {score} to stdout, one line per pair.
inline std::vector<double> run_external_scorer(const std::string& command,
                                               const std::vector<std::string>& candidates,
                                               const std::vector<std::string>& references) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() /
                 ("cslt_scorer_" + std::to_string(uint64_t(::getpid())) + "_" +
                  std::to_string(fnv1a64(command)));
  fs::create_directories(dir);
  fs::path in_path = dir / "pairs.jsonl";
  fs::path out_path = dir / "scores.jsonl";

  std::ostringstream in;
  for (size_t i = 0; i < candidates.size(); ++i)
    in << nlohmann::json{{"candidate", candidates[i]}, {"reference", references[i]}}.dump()
       << "\n";
  write_text_file(in_path, in.str());

  std::string full = command + " < " + in_path.string() + " > " + out_path.string();
  int rc = std::system(full.c_str());
  if (rc != 0)
    throw DataError("external scorer failed (exit " + std::to_string(rc) + "): " + command);

  std::vector<double> scores;
  for_each_line(out_path, [&](size_t lineno, const std::string& line) {
    try {
      scores.push_back(nlohmann::json::parse(line).at("score").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("external scorer line " + std::to_string(lineno) + ": " + e.what());
    }
  });
  if (scores.size() != candidates.size())
    throw DataError("external scorer returned " + std::to_string(scores.size()) +
                    " scores for " + std::to_string(candidates.size()) + " pairs");
  return scores;
}

// ---------------------------------------------------------------------------

inline MetricReport evaluate_corpus(const std::vector<TranslationHypothesis>& hypotheses,
                                    const Manifest& manifest, const Lexicon& lexicon,
                                    const EvalOptions& opts = {}) {
  if (hypotheses.empty()) throw DataError("empty hypothesis set");

  std::map<std::string, const SentenceRecord*> by_id;
  for (const auto& e : manifest.episodes)
    for (const auto& s : e.sentences) by_id[s.sentence_id()] = &s;

  std::vector<std::string> orphans;
  for (const auto& h : hypotheses)
    if (!by_id.count(h.sentence_id)) orphans.push_back(h.sentence_id);
  if (!orphans.empty())
    throw DataError("hypotheses without manifest sentences: " + join(orphans, ", "));

  std::vector<std::string> candidates, references;
  for (const auto& h : hypotheses) {
    candidates.push_back(h.text);
    references.push_back(by_id.at(h.sentence_id)->gt_text);
  }

  MetricReport report;
  double rouge_sum = 0.0, iou_sum = 0.0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    PerSentenceScores row;
    row.sentence_id = hypotheses[i].sentence_id;
    row.rouge_l = rouge_l(candidates[i], references[i]);
    row.iou = iou_lemma_syn(candidates[i], references[i], lexicon, opts.iou);
    if (opts.sentence_bleu) row.b4 = sentence_bleu_smoothed(candidates[i], references[i]);
    rouge_sum += row.rouge_l;
    iou_sum += row.iou;
    report.per_sentence.push_back(std::move(row));
  }
  report.corpus.b4 = bleu4(candidates, references);
  report.corpus.rouge_l = rouge_sum / double(hypotheses.size());
  report.corpus.iou_mean = iou_sum / double(hypotheses.size());
  if (hypotheses.size() >= 2) report.corpus.cider = cider(candidates, references);

  if (opts.judge_cfg) {
    if (!opts.judge_transport) throw ConfigError("judge configured without a transport");
    std::vector<std::pair<std::string, std::string>> pairs;
    for (size_t i = 0; i < hypotheses.size(); ++i)
      pairs.emplace_back(references[i], candidates[i]);
    auto outcomes = judge_batch(*opts.judge_cfg, pairs, opts.judge_transport);
    double sum = 0.0;
    long scored = 0;
    for (size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].verdict) {
        report.per_sentence[i].llm_score = double(outcomes[i].verdict->score);
        report.per_sentence[i].llm_reason = outcomes[i].verdict->reason;
        sum += double(outcomes[i].verdict->score);
        ++scored;
      } else {
        report.per_sentence[i].llm_failed = true;
        ++report.corpus.llm_failures;
      }
    }
    if (scored > 0) report.corpus.llm_mean = sum / double(scored);
  }

  for (const auto& [name, command] : opts.external_scorers) {
    auto scores = run_external_scorer(command, candidates, references);
    double sum = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
      report.per_sentence[i].external_scores[name] = scores[i];
      sum += scores[i];
    }
    report.corpus.external_means[name] = sum / double(scores.size());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& row : r.per_sentence) {
    nlohmann::json j{{"sentence_id", row.sentence_id},
                     {"rouge_l", row.rouge_l},
                     {"iou", row.iou}};
    if (row.b4) j["b4"] = *row.b4;
    if (row.llm_score) {
      j["llm_score"] = *row.llm_score;
      j["llm_reason"] = row.llm_reason;
    }
    if (row.llm_failed) j["llm_failed"] = true;
    if (!row.external_scores.empty()) j["external_scores"] = row.external_scores;
    per.push_back(std::move(j));
  }
  nlohmann::json corpus{{"b4", r.corpus.b4},
                        {"rouge_l", r.corpus.rouge_l},
                        {"iou_mean", r.corpus.iou_mean}};
  corpus["cider"] = r.corpus.cider ? nlohmann::json(*r.corpus.cider) : nlohmann::json();
  if (r.corpus.llm_mean) corpus["llm_mean"] = *r.corpus.llm_mean;
  if (r.corpus.llm_failures) corpus["llm_failures"] = r.corpus.llm_failures;
  if (!r.corpus.external_means.empty()) corpus["external_means"] = r.corpus.external_means;
  return nlohmann::json{{"per_sentence", per}, {"corpus", corpus}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  for (const auto& row : j.at("per_sentence")) {
    PerSentenceScores s;
    s.sentence_id = row.at("sentence_id").get<std::string>();
    s.rouge_l = row.at("rouge_l").get<double>();
    s.iou = row.at("iou").get<double>();
    if (row.contains("b4")) s.b4 = row["b4"].get<double>();
    if (row.contains("llm_score")) {
      s.llm_score = row["llm_score"].get<double>();
      s.llm_reason = row.value("llm_reason", "");
    }
    s.llm_failed = row.value("llm_failed", false);
    if (row.contains("external_scores"))
      for (const auto& [k, v] : row["external_scores"].items())
        s.external_scores[k] = v.get<double>();
    r.per_sentence.push_back(std::move(s));
  }
  const auto& c = j.at("corpus");
  r.corpus.b4 = c.at("b4").get<double>();
  r.corpus.rouge_l = c.at("rouge_l").get<double>();
  r.corpus.iou_mean = c.at("iou_mean").get<double>();
  if (c.contains("cider") && !c["cider"].is_null()) r.corpus.cider = c["cider"].get<double>();
  if (c.contains("llm_mean")) r.corpus.llm_mean = c["llm_mean"].get<double>();
  r.corpus.llm_failures = c.value("llm_failures", 0L);
  if (c.contains("external_means"))
    for (const auto& [k, v] : c["external_means"].items())
      r.corpus.external_means[k] = v.get<double>();
  return r;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

// Per-sentence rows as CSV for spreadsheet inspection.
inline std::string report_to_csv(const MetricReport& r) {
  std::set<std::string> ext_names;
  bool any_b4 = false, any_llm = false;
  for (const auto& row : r.per_sentence) {
    for (const auto& [k, _] : row.external_scores) ext_names.insert(k);
    any_b4 |= row.b4.has_value();
    any_llm |= row.llm_score.has_value() || row.llm_failed;
  }
  std::ostringstream out;
  out << "sentence_id,rouge_l,iou";
  if (any_b4) out << ",b4";
  if (any_llm) out << ",llm_score,llm_reason";
  for (const auto& n : ext_names) out << "," << csv_escape(n);
  out << "\n";
  out.precision(10);
  for (const auto& row : r.per_sentence) {
    out << csv_escape(row.sentence_id) << "," << row.rouge_l << "," << row.iou;
    if (any_b4) out << "," << (row.b4 ? std::to_string(*row.b4) : "");
    if (any_llm) {
      out << ",";
      if (row.llm_score) out << *row.llm_score;
      out << "," << csv_escape(row.llm_failed ? "JUDGE_FAILED" : row.llm_reason);
    }
    for (const auto& n : ext_names) {
      out << ",";
      auto it = row.external_scores.find(n);
      if (it != row.external_scores.end()) out << it->second;
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Pairwise correlation over per-sentence metric columns (plus any externally
// supplied column such as human scores).

struct CorrelationCell {
  std::optional<double> pearson;
  std::optional<double> spearman;
};

inline std::map<std::string, std::map<std::string, CorrelationCell>> correlation_report(
    const std::map<std::string, std::vector<double>>& columns) {
  for (const auto& [name, col] : columns)
    if (col.size() < 3)
      throw DataError("correlation column '" + name + "' has fewer than 3 samples");
  std::map<std::string, std::map<std::string, CorrelationCell>> out;
  for (const auto& [a, col_a] : columns)
    for (const auto& [b, col_b] : columns) {
      if (col_a.size() != col_b.size())
        throw DataError("correlation columns differ in length: " + a + " vs " + b);
      CorrelationCell cell;
      cell.pearson = pearson(col_a, col_b);
      cell.spearman = spearman(col_a, col_b);
      out[a][b] = cell;
    }
  return out;
}

inline nlohmann::json correlation_to_json(
    const std::map<std::string, std::map<std::string, CorrelationCell>>& matrix) {
  nlohmann::json j;
  for (const auto& [a, row] : matrix)
    for (const auto& [b, cell] : row) {
      j[a][b]["pearson"] = cell.pearson ? nlohmann::json(*cell.pearson) : nlohmann::json();
      j[a][b]["spearman"] = cell.spearman ? nlohmann::json(*cell.spearman) : nlohmann::json();
    }
  return j;
}

}  // namespace cslt
