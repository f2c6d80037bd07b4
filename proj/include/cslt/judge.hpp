#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <thread>

#include "cslt/common.hpp"

namespace cslt {

using OrderedJson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Calibration examples: two per score from 0 to 5, sent as user/assistant
// pairs ahead of the sentence being judged.

struct CalibrationPair {
  std::string reference;
  std::string candidate;
  int score;
  std::string reason;
};

inline const std::vector<CalibrationPair>& default_calibration_pairs() {
  static const std::vector<CalibrationPair> pairs = {
      {"It's blind to the genius loci.", "And that's what it means to be dislocated.", 0,
       "No shared key nouns or verbs; the reference mentions 'blind' and 'genius loci', while "
       "the candidate mentions 'dislocated'; meanings are different."},
      {"She put it by the entrance to the earth so we figure that they like heavy metal or "
       "something.",
       "You've been in a wheelchair for a long time.", 0,
       "No shared key nouns or verbs; the reference talks about 'entrance', 'earth', 'heavy "
       "metal', while the candidate mentions 'wheelchair'; meanings are unrelated."},
      {"You're coming along to the finale tomorrow?", "I'll have to wait until tomorrow.", 1,
       "Shares the key noun 'tomorrow' but lacks other key content; meanings are somewhat "
       "related but differ."},
      {"A man's can was open for attack at any point in their life.",
       "It's not a joke, it's a way of life.", 1,
       "Shares the key noun 'life', but overall meanings are different; reference discusses "
       "vulnerability, candidate discusses lifestyle."},
      {"Richard called English Nature, who told him that they were natterjack toads, Britain's "
       "rarest amphibian.",
       "Richard, a Nottinghamshire Englishman, is a naturalist.", 2,
       "Shares key nouns 'Richard' and 'English'; candidate omits details about 'natterjack "
       "toads' and 'Britain's rarest amphibian'."},
      {"Cromwell treated Ireland like the primitive colony he thought it was, moving the Irish "
       "off their farms and using the land to pay his soldiers.",
       "Cromwell was just one of many areas where the IRA set up roadblocks to stop loyalist "
       "paramilitaries and farmers from getting through.",
       2,
       "Shares key nouns 'Cromwell', 'Ireland', 'farmers'; reference discusses historical "
       "actions, candidate discusses modern events; meanings differ."},
      {"He sort of guessed it would be 21 maybe 28 days, ended-up being 35.",
       "He thought it was 21 days.", 3,
       "Matches key nouns 'he', 'thought', '21 days'; candidate conveys a similar time "
       "estimation with fewer details."},
      {"They get as high as they can off the ground to push the other male down to the floor, "
       "and once that male becomes subservient, he slinks off and the dominant male then goes "
       "to his female to breed.",
       "But when one of them is selected, it's the females that can be changed to breed with "
       "the new male.",
       3,
       "Shares key nouns 'male', 'female', 'breed'; both discuss breeding behaviors, though "
       "specifics differ."},
      {"It's a lack of understanding on both sides.", "I don't understand that.", 3,
       "Shares key verb 'understand'; both express lack of understanding; candidate is less "
       "specific."},
      {"OK, we'll just ring him next time.", "I'll call you back.", 4,
       "Shares key verb 'call' (synonym of 'ring'); both involve making a call; minor "
       "differences in context."},
      {"Really excited.", "I'm so excited.", 5,
       "Conveys the same overall meaning; both express excitement with minor wording "
       "differences."},
      {"Every day is totally different.", "You know, every day is different.", 5,
       "Conveys the same overall meaning; both state that each day is different with minor "
       "phrasing differences."},
  };
  return pairs;
}

inline const char* judge_system_prompt() {
  return
      "Evaluate how well the candidate sentence aligns with the content and meaning of the "
      "reference sentence on a scale of 0 to 5.\n"
      "Prioritize key nouns and verbs, while giving less importance to subject, pronouns, "
      "adjectives, and adverbs.\n"
      "Scoring Rules:\n"
      "Score at least 1: If the candidate sentence shares at least one key noun or verb (or "
      "their synonyms) with the reference sentence.\n"
      "Score at least 3: If the candidate sentence matches most of the key nouns and verbs (or "
      "their synonyms) from the reference sentence.\n"
      "Score at least 5: If the candidate sentence conveys the same overall meaning as the "
      "reference sentence, with only minor differences.\n"
      "Note: Do not penalize differences in less important words or variations in sentence "
      "structure.\n"
      "Focus solely on the essential meaning conveyed by the key nouns and verbs.\n"
      "The candidate sentences are sign language translations of a signer signing the "
      "reference sentence.\n"
      "Try to be liberal in the nouns and verbs you consider.";
}

// The instructions repeat in every user message.
inline std::string judge_user_message(const std::string& reference, const std::string& candidate) {
  return
      "Assign a score from 0 to 5 based on the rules provided.\n"
      "Provide your answer in JSON format with keys \"score\" (0-5) and \"reason\" with a "
      "brief explanation.\n"
      "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION. Only provide the JSON string.\n"
      "Reference Sentence: " + reference + "\n"
      "Candidate Sentence: " + candidate;
}

// ---------------------------------------------------------------------------

struct JudgeRetry {
  int attempts = 3;
  int backoff_ms = 500;  // doubles per retry
};

struct JudgeConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8123/v1/chat/completions
  std::string model_name = "gpt-4o-mini";
  double temperature = 0.0;
  int max_concurrency = 4;
  JudgeRetry retry;
  std::vector<CalibrationPair> calibration_pairs = default_calibration_pairs();
  std::string api_key_env = "CSLT_JUDGE_API_KEY";

  void validate() const {
    if (calibration_pairs.size() != 12)
      throw ConfigError("judge requires exactly 12 calibration pairs, got " +
                        std::to_string(calibration_pairs.size()));
    for (const auto& p : calibration_pairs)
      if (p.score < 0 || p.score > 5)
        throw ConfigError("calibration score outside [0,5]");
    if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
    if (retry.attempts < 1) throw ConfigError("retry attempts must be >= 1");
  }
};

struct JudgeVerdict {
  int score = 0;
  std::string reason;
  std::string raw_response;
  bool clamped = false;
};

struct JudgeOutcome {
  std::optional<JudgeVerdict> verdict;  // absent after exhausted retries
  int attempts_used = 0;
  bool parse_failure = false;
};

// Byte-stable chat request: the same (config, reference, candidate) always
// serializes to the identical payload.
inline std::string build_judge_request(const JudgeConfig& cfg, const std::string& reference,
                                       const std::string& candidate) {
  cfg.validate();
  OrderedJson messages = OrderedJson::array();
  messages.push_back({{"role", "system"}, {"content", judge_system_prompt()}});
  for (const auto& pair : cfg.calibration_pairs) {
    messages.push_back(
        {{"role", "user"}, {"content", judge_user_message(pair.reference, pair.candidate)}});
    OrderedJson answer;
    answer["score"] = pair.score;
    answer["reason"] = pair.reason;
    messages.push_back({{"role", "assistant"}, {"content", answer.dump()}});
  }
  messages.push_back({{"role", "user"}, {"content", judge_user_message(reference, candidate)}});

  OrderedJson payload;
  payload["model"] = cfg.model_name;
  payload["temperature"] = cfg.temperature;
  payload["messages"] = messages;
  return payload.dump();
}

struct HttpResult {
  int status = 0;
  std::string body;
};

// Transport abstraction: production uses HTTP (see judge_http.hpp); tests
// inject a function.
using JudgeTransport = std::function<HttpResult(const std::string& request_body)>;

namespace detail {

inline std::optional<std::pair<int, std::string>> parse_judge_content(const std::string& content,
                                                                      bool* clamped) {
  // the model is told to answer with a bare JSON object; tolerate wrappers
  auto lo = content.find('{');
  auto hi = content.rfind('}');
  if (lo == std::string::npos || hi == std::string::npos || hi < lo) return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(content.substr(lo, hi - lo + 1));
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  if (!j.contains("score") || !j.contains("reason")) return std::nullopt;
  int score;
  try {
    if (j["score"].is_string())
      score = std::stoi(j["score"].get<std::string>());
    else
      score = int(std::llround(j["score"].get<double>()));
  } catch (...) {
    return std::nullopt;
  }
  if (score < 0 || score > 5) {
    score = std::clamp(score, 0, 5);
    if (clamped) *clamped = true;
  }
  std::string reason = j["reason"].is_string() ? j["reason"].get<std::string>() : j["reason"].dump();
  return std::make_pair(score, reason);
}

}  // namespace detail

inline JudgeOutcome judge(const JudgeConfig& cfg, const std::string& reference,
                          const std::string& candidate, const JudgeTransport& transport) {
  cfg.validate();
  const std::string request = build_judge_request(cfg, reference, candidate);
  JudgeOutcome outcome;
  int backoff = cfg.retry.backoff_ms;
  for (int attempt = 0; attempt < cfg.retry.attempts; ++attempt) {
    ++outcome.attempts_used;
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    HttpResult res;
    try {
      res = transport(request);
    } catch (const std::exception&) {
      continue;
    }
    if (res.status < 200 || res.status >= 300) continue;

    std::string content;
    try {
      auto j = nlohmann::json::parse(res.body);
      content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      outcome.parse_failure = true;
      continue;
    }
    bool clamped = false;
    auto parsed = detail::parse_judge_content(content, &clamped);
    if (!parsed) {
      outcome.parse_failure = true;
      continue;
    }
    JudgeVerdict v;
    v.score = parsed->first;
    v.reason = parsed->second;
    v.raw_response = content;
    v.clamped = clamped;
    outcome.verdict = v;
    outcome.parse_failure = false;
    return outcome;
  }
  outcome.parse_failure = true;
  return outcome;
}

// Order-independent batch evaluation with bounded in-flight requests.
inline std::vector<JudgeOutcome> judge_batch(
    const JudgeConfig& cfg, const std::vector<std::pair<std::string, std::string>>& ref_cand,
    const JudgeTransport& transport) {
  cfg.validate();
  std::vector<JudgeOutcome> out(ref_cand.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < ref_cand.size(); i = next.fetch_add(1))
      out[i] = judge(cfg, ref_cand[i].first, ref_cand[i].second, transport);
  };
  const int n_threads = std::min<int>(cfg.max_concurrency, int(ref_cand.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace cslt
