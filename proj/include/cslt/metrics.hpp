#pragma once

#include <map>
#include <optional>
#include <unordered_map>

#include "cslt/common.hpp"

namespace cslt {

// Text metrics operate on whitespace tokens of the raw text; the IoU metric
// has its own tokenizer (see lexicon.hpp).

namespace detail {

using NgramCounts = std::map<std::vector<std::string>, long>;

inline NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (int(tokens.size()) < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Corpus BLEU-4: modified n-gram precision pooled over the corpus, uniform
// 1..4-gram weights, brevity penalty, no smoothing. Returns [0, 100].
inline double bleu4(const std::vector<std::string>& candidates,
                    const std::vector<std::string>& references) {
  if (candidates.empty()) throw DataError("bleu4: empty corpus");
  if (candidates.size() != references.size())
    throw DataError("bleu4: candidate/reference count mismatch");

  long cand_len = 0, ref_len = 0;
  long match[4] = {0, 0, 0, 0};
  long total[4] = {0, 0, 0, 0};
  for (size_t i = 0; i < candidates.size(); ++i) {
    auto cand = split_whitespace(candidates[i]);
    auto ref = split_whitespace(references[i]);
    cand_len += long(cand.size());
    ref_len += long(ref.size());
    for (int n = 1; n <= 4; ++n) {
      auto c_counts = detail::count_ngrams(cand, n);
      auto r_counts = detail::count_ngrams(ref, n);
      for (const auto& [gram, count] : c_counts) {
        total[n - 1] += count;
        auto it = r_counts.find(gram);
        if (it != r_counts.end()) match[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_precision = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (match[n] == 0 || total[n] == 0) return 0.0;
    log_precision += 0.25 * std::log(double(match[n]) / double(total[n]));
  }
  const double bp =
      cand_len > ref_len ? 1.0
                         : (cand_len == 0 ? 0.0 : std::exp(1.0 - double(ref_len) / cand_len));
  return 100.0 * bp * std::exp(log_precision);
}

// Sentence-level smoothed BLEU (diagnostics only): add-one smoothing on the
// higher-order precisions.
inline double sentence_bleu_smoothed(const std::string& candidate, const std::string& reference) {
  auto cand = split_whitespace(candidate);
  auto ref = split_whitespace(reference);
  if (cand.empty()) return 0.0;
  double log_precision = 0.0;
  for (int n = 1; n <= 4; ++n) {
    auto c_counts = detail::count_ngrams(cand, n);
    auto r_counts = detail::count_ngrams(ref, n);
    long match = 0, total = 0;
    for (const auto& [gram, count] : c_counts) {
      total += count;
      auto it = r_counts.find(gram);
      if (it != r_counts.end()) match += std::min(count, it->second);
    }
    double p = n == 1 ? (total ? double(match) / total : 0.0)
                      : double(match + 1) / double(total + 1);
    if (p <= 0.0) return 0.0;
    log_precision += 0.25 * std::log(p);
  }
  const double bp = cand.size() > ref.size()
                        ? 1.0
                        : std::exp(1.0 - double(ref.size()) / double(cand.size()));
  return 100.0 * bp * std::exp(log_precision);
}

// ---------------------------------------------------------------------------
// ROUGE-L, F1 convention: F = 2PR / (P + R) with LCS-based precision/recall.
inline double rouge_l(const std::string& candidate, const std::string& reference) {
  auto cand = split_whitespace(candidate);
  auto ref = split_whitespace(reference);
  if (cand.empty() || ref.empty()) return 0.0;

  const size_t m = cand.size(), n = ref.size();
  std::vector<long> prev(n + 1, 0), cur(n + 1, 0);
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      if (cand[i - 1] == ref[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = double(prev[n]);
  if (lcs == 0.0) return 0.0;
  const double p = lcs / double(m), r = lcs / double(n);
  return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// CIDEr-D: 1..4-gram TF-IDF cosine with count clipping and a gaussian length
// penalty (sigma 6), averaged over n and scaled by 10. IDF comes from the
// reference corpus, so a single-document corpus is rejected.
inline double cider(const std::vector<std::string>& candidates,
                    const std::vector<std::string>& references) {
  if (candidates.size() != references.size())
    throw DataError("cider: candidate/reference count mismatch");
  const size_t num_docs = candidates.size();
  if (num_docs < 2) throw DataError("cider: corpus must have >= 2 documents for IDF");

  constexpr int kMaxN = 4;
  constexpr double kSigma = 6.0;

  // document frequency over the references (each document counts once)
  std::map<std::vector<std::string>, long> doc_freq;
  std::vector<std::array<detail::NgramCounts, kMaxN>> ref_counts(num_docs);
  std::vector<long> ref_len(num_docs, 0);
  for (size_t d = 0; d < num_docs; ++d) {
    auto tokens = split_whitespace(references[d]);
    ref_len[d] = long(tokens.size());
    for (int n = 1; n <= kMaxN; ++n) ref_counts[d][n - 1] = detail::count_ngrams(tokens, n);
    std::map<std::vector<std::string>, bool> seen;
    for (int n = 0; n < kMaxN; ++n)
      for (const auto& [gram, count] : ref_counts[d][n]) seen[gram] = true;
    for (const auto& [gram, _] : seen) ++doc_freq[gram];
  }
  const double log_num_docs = std::log(double(num_docs));

  auto tfidf = [&](const detail::NgramCounts& counts, int n, double& norm_out) {
    std::map<std::vector<std::string>, double> vec;
    double norm = 0.0;
    for (const auto& [gram, count] : counts) {
      auto it = doc_freq.find(gram);
      double df = it == doc_freq.end() ? 0.0 : double(it->second);
      double idf = log_num_docs - std::log(std::max(1.0, df));
      double w = double(count) * idf;
      vec[gram] = w;
      norm += w * w;
    }
    norm_out = std::sqrt(norm);
    return vec;
  };

  double corpus_score = 0.0;
  for (size_t d = 0; d < num_docs; ++d) {
    auto cand_tokens = split_whitespace(candidates[d]);
    const double delta = double(long(cand_tokens.size()) - ref_len[d]);
    const double len_penalty = std::exp(-delta * delta / (2.0 * kSigma * kSigma));
    double score_n_sum = 0.0;
    for (int n = 1; n <= kMaxN; ++n) {
      double cand_norm = 0.0, ref_norm = 0.0;
      auto cand_vec = tfidf(detail::count_ngrams(cand_tokens, n), n, cand_norm);
      auto ref_vec = tfidf(ref_counts[d][n - 1], n, ref_norm);
      double dot = 0.0;
      for (const auto& [gram, w] : cand_vec) {
        auto it = ref_vec.find(gram);
        if (it != ref_vec.end()) dot += std::min(w, it->second) * it->second;
      }
      double val = 0.0;
      if (cand_norm > 0.0 && ref_norm > 0.0) val = dot / (cand_norm * ref_norm);
      score_n_sum += val * len_penalty;
    }
    corpus_score += score_n_sum / kMaxN;
  }
  return 10.0 * corpus_score / double(num_docs);
}

// ---------------------------------------------------------------------------
// Pearson and Spearman correlation; constant columns are undefined rather
// than NaN-propagated.

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw DataError("correlation needs >= 3 paired samples");
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;  // constant column
  return sxy / std::sqrt(sxx * syy);
}

// Ranks with tie averaging.
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
  std::vector<size_t> idx(v.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size(), 0.0);
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg_rank = (double(i) + double(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = avg_rank;
    i = j + 1;
  }
  return ranks;
}

inline std::optional<double> spearman(const std::vector<double>& x,
                                      const std::vector<double>& y) {
  return pearson(fractional_ranks(x), fractional_ranks(y));
}

}  // namespace cslt
