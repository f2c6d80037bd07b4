#pragma once

#include <map>
#include <nlohmann/json.hpp>

#include "cslt/types.hpp"

namespace cslt {

struct Episode {
  std::string episode_id;
  std::vector<SentenceRecord> sentences;  // ordered by sentence_index
};

struct ManifestLoadOptions {
  // The duration filter is a training-time choice; evaluation loads can
  // disable it.
  bool apply_duration_filter = true;
  double min_duration_sec = 1.0;
  double max_duration_sec = 20.0;
};

struct Manifest {
  std::vector<Episode> episodes;  // sorted by episode_id
  size_t skipped_out_of_bounds = 0;

  size_t num_sentences() const {
    size_t n = 0;
    for (const auto& e : episodes) n += e.sentences.size();
    return n;
  }

  std::vector<const SentenceRecord*> all_sentences() const {
    std::vector<const SentenceRecord*> out;
    for (const auto& e : episodes)
      for (const auto& s : e.sentences) out.push_back(&s);
    return out;
  }

  const SentenceRecord* find(const std::string& sentence_id) const {
    for (const auto& e : episodes)
      for (const auto& s : e.sentences)
        if (s.sentence_id() == sentence_id) return &s;
    return nullptr;
  }
};

// Manifest JSONL, one object per sentence:
// {"episode_id": str, "sentence_index": int, "start_sec": float, "end_sec": float,
//  "gt_text": str, "feature_path": str|null, "gloss_path": str|null, "caption_path": str|null}
//
// Grouping is a permutation-invariant function of the line set: episodes are
// ordered by id and sentences by index, never by file position.
inline Manifest load_manifest(const std::filesystem::path& path,
                              const ManifestLoadOptions& opts = {}) {
  using nlohmann::json;
  std::map<std::string, std::vector<SentenceRecord>> grouped;
  Manifest manifest;

  auto opt_path = [](const json& j, const char* key) -> std::string {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    return j.at(key).get<std::string>();
  };

  for_each_line(path, [&](size_t lineno, const std::string& line) {
    json j;
    try {
      j = json::parse(line);
      SentenceRecord rec;
      rec.episode_id = j.at("episode_id").get<std::string>();
      rec.sentence_index = j.at("sentence_index").get<int>();
      rec.start_sec = j.at("start_sec").get<double>();
      rec.end_sec = j.at("end_sec").get<double>();
      rec.gt_text = j.at("gt_text").get<std::string>();
      rec.feature_path = opt_path(j, "feature_path");
      rec.gloss_path = opt_path(j, "gloss_path");
      rec.caption_path = opt_path(j, "caption_path");

      if (rec.sentence_index < 0)
        throw DataError("negative sentence_index");
      if (rec.end_sec <= rec.start_sec) {
        ++manifest.skipped_out_of_bounds;
        return;
      }
      if (opts.apply_duration_filter &&
          (rec.duration() < opts.min_duration_sec || rec.duration() > opts.max_duration_sec)) {
        ++manifest.skipped_out_of_bounds;
        return;
      }
      grouped[rec.episode_id].push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw DataError("malformed manifest line " + std::to_string(lineno) + " in " +
                      path.string() + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("invalid manifest line " + std::to_string(lineno) + " in " +
                      path.string() + ": " + e.what());
    }
  });

  for (auto& [episode_id, records] : grouped) {
    std::sort(records.begin(), records.end(),
              [](const SentenceRecord& a, const SentenceRecord& b) {
                return a.sentence_index < b.sentence_index;
              });
    for (size_t i = 1; i < records.size(); ++i)
      if (records[i].sentence_index == records[i - 1].sentence_index)
        throw DataError("duplicate sentence_index " + std::to_string(records[i].sentence_index) +
                        " in episode " + episode_id);
    manifest.episodes.push_back({episode_id, std::move(records)});
  }
  return manifest;
}

inline void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  using nlohmann::json;
  std::ostringstream out;
  for (const auto& e : manifest.episodes) {
    for (const auto& s : e.sentences) {
      json j{{"episode_id", s.episode_id},
             {"sentence_index", s.sentence_index},
             {"start_sec", s.start_sec},
             {"end_sec", s.end_sec},
             {"gt_text", s.gt_text}};
      j["feature_path"] = s.feature_path.empty() ? json() : json(s.feature_path);
      j["gloss_path"] = s.gloss_path.empty() ? json() : json(s.gloss_path);
      j["caption_path"] = s.caption_path.empty() ? json() : json(s.caption_path);
      out << j.dump() << "\n";
    }
  }
  write_text_file(path, out.str());
}

}  // namespace cslt
