#pragma once

#include <cstring>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "cslt/common.hpp"

namespace cslt {

// Penn-Treebank-style tokenization, lowercased: contractions split off
// ("i'll" -> "i", "'ll"; "don't" -> "do", "n't"), punctuation as its own
// token.
inline std::vector<std::string> ptb_tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string lower = to_lower(text);
  size_t i = 0;
  auto is_word_char = [](unsigned char c) { return std::isalnum(c); };

  while (i < lower.size()) {
    unsigned char c = lower[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      size_t j = i;
      while (j < lower.size() && is_word_char(static_cast<unsigned char>(lower[j]))) ++j;
      std::string word = lower.substr(i, j - i);
      // n't attaches to the preceding word: "don(')t" handled below via the
      // apostrophe branch, so only plain words land here
      out.push_back(std::move(word));
      i = j;
    } else if (c == '\'' && i + 1 < lower.size() &&
               is_word_char(static_cast<unsigned char>(lower[i + 1]))) {
      size_t j = i + 1;
      while (j < lower.size() && is_word_char(static_cast<unsigned char>(lower[j]))) ++j;
      std::string suffix = lower.substr(i, j - i);  // includes the apostrophe
      // "don" + "'t" -> "do" + "n't"
      if (suffix == "'t" && !out.empty() && out.back().size() > 1 && out.back().back() == 'n') {
        out.back().pop_back();
        out.push_back("n't");
      } else {
        out.push_back(std::move(suffix));
      }
      i = j;
    } else {
      out.push_back(std::string(1, static_cast<char>(c)));
      ++i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon: a shipped lemma lookup table plus conservative suffix rules as a
// fallback, and synonym sets over lemmas.

class Lexicon {
 public:
  Lexicon() = default;

  // lemmas.tsv: "<surface>\t<lemma>" per line.
  // synonyms.tsv: one space-separated set of lemmas per line.
  static Lexicon load(const std::filesystem::path& lemma_path,
                      const std::filesystem::path& synonym_path) {
    Lexicon lex;
    if (!std::filesystem::exists(lemma_path))
      throw DataError("lemma table missing: " + lemma_path.string());
    for_each_line(lemma_path, [&](size_t lineno, const std::string& line) {
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError("lemma table line " + std::to_string(lineno) + " has no tab");
      lex.lemma_table_[to_lower(trim(line.substr(0, tab)))] = to_lower(trim(line.substr(tab + 1)));
    });
    if (!std::filesystem::exists(synonym_path))
      throw DataError("synonym table missing: " + synonym_path.string());
    int set_id = 0;
    for_each_line(synonym_path, [&](size_t, const std::string& line) {
      for (const auto& w : split_whitespace(to_lower(line)))
        lex.synset_ids_[w].push_back(set_id);
      ++set_id;
    });
    return lex;
  }

  static Lexicon load_default() {
    auto dir = default_data_dir();
    return load(dir / "lemmas.tsv", dir / "synonyms.tsv");
  }

  // An empty synonym database degrades the metric to lemma-set IoU.
  static Lexicon from_tables(std::unordered_map<std::string, std::string> lemmas,
                             const std::vector<std::vector<std::string>>& synsets) {
    Lexicon lex;
    lex.lemma_table_ = std::move(lemmas);
    for (size_t i = 0; i < synsets.size(); ++i)
      for (const auto& w : synsets[i]) lex.synset_ids_[to_lower(w)].push_back(int(i));
    return lex;
  }

  std::string lemma(const std::string& word) const {
    auto it = lemma_table_.find(word);
    if (it != lemma_table_.end()) return it->second;
    return suffix_fallback(word);
  }

  bool share_synset(const std::string& lemma_a, const std::string& lemma_b) const {
    auto a = synset_ids_.find(lemma_a);
    auto b = synset_ids_.find(lemma_b);
    if (a == synset_ids_.end() || b == synset_ids_.end()) return false;
    for (int ia : a->second)
      for (int ib : b->second)
        if (ia == ib) return true;
    return false;
  }

 private:
  // Regular English inflections only; irregulars belong in the table.
  static std::string suffix_fallback(const std::string& w) {
    auto ends = [&](const char* suffix) {
      size_t n = std::strlen(suffix);
      return w.size() > n && w.compare(w.size() - n, n, suffix) == 0;
    };
    if (ends("ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
    if (ends("sses")) return w.substr(0, w.size() - 2);
    if (ends("shes") || ends("ches") || ends("xes") || ends("zes"))
      return w.substr(0, w.size() - 2);
    if (ends("s") && !ends("ss") && !ends("us") && !ends("is") && w.size() > 3)
      return w.substr(0, w.size() - 1);
    return w;
  }

  std::unordered_map<std::string, std::string> lemma_table_;
  std::unordered_map<std::string, std::vector<int>> synset_ids_;
};

// ---------------------------------------------------------------------------
// IoU over lemmatized token multisets with synonym forgiveness.
//
// Matching: exact-equal lemmas match first (multiset intersection), then
// synonym pairs are taken greedily in lexicographic (min, max) order, which
// makes the procedure symmetric under swapping candidate and reference.
// IoU = matched / (|cand| + |ref| - matched).

struct IouOptions {
  bool multiset = true;  // false: dedupe lemmas before matching
};

inline long greedy_match_count(std::vector<std::string> a, std::vector<std::string> b,
                               const Lexicon& lexicon) {
  long matched = 0;
  // exact matches: multiset intersection
  std::map<std::string, long> b_counts;
  for (const auto& w : b) ++b_counts[w];
  std::vector<std::string> a_rest, b_rest;
  for (const auto& w : a) {
    auto it = b_counts.find(w);
    if (it != b_counts.end() && it->second > 0) {
      --it->second;
      ++matched;
    } else {
      a_rest.push_back(w);
    }
  }
  for (auto& [w, count] : b_counts)
    for (long k = 0; k < count; ++k) b_rest.push_back(w);

  // synonym matches, side-symmetric ordering
  struct Pair {
    std::string lo, hi;
    size_t ai, bi;
  };
  std::vector<Pair> pairs;
  for (size_t i = 0; i < a_rest.size(); ++i)
    for (size_t j = 0; j < b_rest.size(); ++j)
      if (lexicon.share_synset(a_rest[i], b_rest[j]))
        pairs.push_back({std::min(a_rest[i], b_rest[j]), std::max(a_rest[i], b_rest[j]), i, j});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.lo != y.lo) return x.lo < y.lo;
    if (x.hi != y.hi) return x.hi < y.hi;
    if (x.ai != y.ai) return x.ai < y.ai;
    return x.bi < y.bi;
  });
  std::vector<char> a_used(a_rest.size(), 0), b_used(b_rest.size(), 0);
  for (const auto& p : pairs) {
    if (a_used[p.ai] || b_used[p.bi]) continue;
    a_used[p.ai] = b_used[p.bi] = 1;
    ++matched;
  }
  return matched;
}

inline std::vector<std::string> lemmatized_tokens(const std::string& text, const Lexicon& lexicon,
                                                  bool multiset) {
  std::vector<std::string> lemmas;
  for (const auto& tok : ptb_tokenize(text)) lemmas.push_back(lexicon.lemma(tok));
  if (!multiset) {
    std::sort(lemmas.begin(), lemmas.end());
    lemmas.erase(std::unique(lemmas.begin(), lemmas.end()), lemmas.end());
  }
  return lemmas;
}

inline double iou_lemma_syn(const std::string& candidate, const std::string& reference,
                            const Lexicon& lexicon, const IouOptions& opts = {}) {
  auto cand = lemmatized_tokens(candidate, lexicon, opts.multiset);
  auto ref = lemmatized_tokens(reference, lexicon, opts.multiset);
  if (cand.empty() && ref.empty()) return 0.0;
  const long matched = greedy_match_count(cand, ref, lexicon);
  const long union_size = long(cand.size()) + long(ref.size()) - matched;
  return union_size == 0 ? 0.0 : double(matched) / double(union_size);
}

}  // namespace cslt
