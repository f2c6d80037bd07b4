#pragma once

#include <set>
#include <unordered_map>

#include "cslt/common.hpp"

namespace cslt {

// Word-level subword-free vocabulary for the tiny decoder: lowercase,
// alphanumeric runs are words, every other visible character is its own
// token. Ids 0..3 are reserved for specials.
class WordTokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  WordTokenizer() { init_specials(); }

  static std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : to_lower(text)) {
      if (std::isalnum(c)) {
        cur.push_back(static_cast<char>(c));
      } else {
        if (!cur.empty()) {
          out.push_back(cur);
          cur.clear();
        }
        if (!std::isspace(c)) out.push_back(std::string(1, static_cast<char>(c)));
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  // Deterministic vocabulary: unique surface tokens, sorted, after specials.
  static WordTokenizer build(const std::vector<std::string>& texts) {
    std::set<std::string> words;
    for (const auto& t : texts)
      for (auto& w : split_words(t)) words.insert(w);
    WordTokenizer tok;
    for (const auto& w : words) tok.add_word(w);
    return tok;
  }

  int vocab_size() const { return static_cast<int>(id_to_word_.size()); }

  int id_of(const std::string& word) const {
    auto it = word_to_id_.find(word);
    return it == word_to_id_.end() ? kUnk : it->second;
  }

  const std::string& word_of(int id) const { return id_to_word_.at(id); }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> ids;
    for (const auto& w : split_words(text)) ids.push_back(id_of(w));
    return ids;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::vector<std::string> words;
    for (int id : ids) {
      if (id == kPad || id == kBos || id == kEos) continue;
      words.push_back(id_to_word_.at(id));
    }
    return join(words, " ");
  }

  void save(const std::filesystem::path& path) const {
    std::string out;
    for (size_t i = 4; i < id_to_word_.size(); ++i) out += id_to_word_[i] + "\n";
    write_text_file(path, out);
  }

  static WordTokenizer load(const std::filesystem::path& path) {
    WordTokenizer tok;
    for_each_line(path, [&](size_t, const std::string& line) { tok.add_word(trim(line)); });
    return tok;
  }

 private:
  void init_specials() {
    for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>"}) {
      word_to_id_[s] = static_cast<int>(id_to_word_.size());
      id_to_word_.emplace_back(s);
    }
  }

  void add_word(const std::string& w) {
    if (w.empty() || word_to_id_.count(w)) return;
    word_to_id_[w] = static_cast<int>(id_to_word_.size());
    id_to_word_.push_back(w);
  }

  std::vector<std::string> id_to_word_;
  std::unordered_map<std::string, int> word_to_id_;
};

}  // namespace cslt
