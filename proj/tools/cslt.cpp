// cslt: contextual sign language translation toolkit.
//
// Subcommands cover the full pipeline: synthetic corpus generation, cue
// extraction, training (with the no-prev variant), previous-sentence
// precompute, episode translation under any cue subset, metric evaluation
// with an optional LLM judge, the 16-mask ablation grid, and correlation
// reports. Every run writes a resolved-config snapshot next to its outputs.

#include <CLI11.hpp>
#include <iostream>

#include "cslt/config.hpp"
#include "cslt/evaluate.hpp"
#include "cslt/inference.hpp"
#include "cslt/judge_http.hpp"
#include "cslt/synthetic.hpp"
#include "cslt/training.hpp"

using namespace cslt;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config materialization: every getter call below records the resolved value,
// so the snapshot carries all defaults. Precedence is flag > file > default.

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value
};

Config load_config(const CommonArgs& args) {
  Config cfg;
  if (!args.config_path.empty()) cfg.merge_file(args.config_path);
  for (const auto& kv : args.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    cfg.set_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

ManifestLoadOptions manifest_options(Config& cfg, bool default_filter) {
  ManifestLoadOptions opts;
  opts.apply_duration_filter = cfg.get_bool("data", "duration_filter", default_filter);
  opts.min_duration_sec = cfg.get_double("data", "min_duration_sec", 1.0);
  opts.max_duration_sec = cfg.get_double("data", "max_duration_sec", 20.0);
  return opts;
}

std::set<std::string> stopwords_from(Config& cfg) {
  return load_stopwords(
      cfg.get_string("data", "stopwords", (default_data_dir() / "stopwords.txt").string()));
}

Lexicon lexicon_from(Config& cfg) {
  return Lexicon::load(
      cfg.get_string("data", "lemmas", (default_data_dir() / "lemmas.tsv").string()),
      cfg.get_string("data", "synonyms", (default_data_dir() / "synonyms.tsv").string()));
}

PromptTemplate prompt_from(Config& cfg) {
  PromptTemplate def = default_template();
  PromptTemplate t;
  t.instruction = cfg.get_string("prompt", "instruction", def.instruction);
  t.prev_prompt = cfg.get_string("prompt", "prev_prompt", def.prev_prompt);
  t.pg_prompt = cfg.get_string("prompt", "pg_prompt", def.pg_prompt);
  t.bg_prompt = cfg.get_string("prompt", "bg_prompt", def.bg_prompt);
  t.vid_prompt = cfg.get_string("prompt", "vid_prompt", def.vid_prompt);
  t.cue_order = TranslationModel<float>::parse_cue_order(
      cfg.get_string("prompt", "cue_order", "prev,pg,bg,vid"));
  t.validate();
  return t;
}

DecoderSpec decoder_spec_from(Config& cfg) {
  DecoderSpec spec;
  spec.model_id = cfg.get_string("model", "model_id", "tiny");
  spec.embed_dim = cfg.get_int("model", "embed_dim", 128);
  spec.num_layers = cfg.get_int("model", "num_layers", 4);
  spec.num_heads = cfg.get_int("model", "num_heads", 4);
  spec.ff_dim = cfg.get_int("model", "ff_dim", 256);
  spec.max_seq_len = cfg.get_int("model", "max_seq_len", 512);
  return spec;
}

MappingNetworkConfig mapping_from(Config& cfg, int embed_dim) {
  MappingNetworkConfig mc;
  mc.variant =
      MappingNetworkConfig::parse_variant(cfg.get_string("model", "mapping_variant", "mlp"));
  mc.in_dim = cfg.get_int("model", "feature_dim", 768);
  mc.out_dim = embed_dim;
  if (mc.variant == MappingNetworkConfig::Variant::cnn_mlp) mc.cnn = CnnConfig{};
  mc.validate();
  return mc;
}

std::optional<AdapterConfig> adapter_from(Config& cfg) {
  if (!cfg.get_bool("adapter", "enabled", true)) return std::nullopt;
  AdapterConfig ac;
  ac.rank = cfg.get_int("adapter", "rank", 4);
  ac.alpha = cfg.get_double("adapter", "alpha", 16.0);
  ac.dropout = cfg.get_double("adapter", "dropout", 0.05);
  std::string targets = cfg.get_string("adapter", "targets", "query,value");
  ac.target_query = targets.find("query") != std::string::npos;
  ac.target_value = targets.find("value") != std::string::npos;
  ac.embedding_frozen = cfg.get_bool("adapter", "embedding_frozen", true);
  ac.validate();
  return ac;
}

AugmentationConfig augment_from(Config& cfg) {
  AugmentationConfig a;
  a.word_drop_max = cfg.get_double("augment", "word_drop_max", 0.5);
  a.word_drop_apply_prob = cfg.get_double("augment", "word_drop_apply_prob", 0.5);
  a.cue_drop_prob = cfg.get_double("augment", "cue_drop_prob", 0.5);
  a.prev_pred_prob = cfg.get_double("augment", "prev_pred_prob", 0.5);
  a.target_word_drop_max = cfg.get_double("augment", "target_word_drop_max", 0.0);
  a.validate();
  return a;
}

TrainConfig train_from(Config& cfg) {
  TrainConfig t;
  t.epochs = cfg.get_int("train", "epochs", 10);
  t.warmup_epochs = cfg.get_int("train", "warmup_epochs", 5);
  t.lr = cfg.get_double("train", "lr", 1e-4);
  t.grad_clip = cfg.get_double("train", "grad_clip", 1.0);
  t.batch_size = cfg.get_int("train", "batch_size", 2);
  t.accum_steps = cfg.get_int("train", "accum_steps", 1);
  t.seed = uint64_t(cfg.get_long("train", "seed", 0));
  t.augment_enabled = cfg.get_bool("train", "augment", true);
  t.validate();
  return t;
}

DecodingConfig decoding_from(Config& cfg) {
  DecodingConfig d;
  d.strategy = cfg.get_string("decode", "strategy", "greedy");
  d.max_new_tokens = cfg.get_int("decode", "max_new_tokens", 64);
  d.seed = uint64_t(cfg.get_long("decode", "seed", 0));
  d.validate();
  return d;
}

JudgeConfig judge_from(Config& cfg) {
  JudgeConfig j;
  j.endpoint = cfg.get_string("judge", "endpoint", "");
  j.model_name = cfg.get_string("judge", "model_name", "gpt-4o-mini");
  j.temperature = cfg.get_double("judge", "temperature", 0.0);
  j.max_concurrency = cfg.get_int("judge", "max_concurrency", 4);
  j.retry.attempts = cfg.get_int("judge", "retry_attempts", 3);
  j.retry.backoff_ms = cfg.get_int("judge", "retry_backoff_ms", 500);
  return j;
}

SyntheticConfig synth_from(Config& cfg) {
  SyntheticConfig s;
  s.num_episodes = cfg.get_int("synth", "num_episodes", 25);
  s.sentences_per_episode = cfg.get_int("synth", "sentences_per_episode", 8);
  s.vocab_size = cfg.get_int("synth", "vocab_size", 48);
  s.homonym_pairs = cfg.get_int("synth", "homonym_pairs", 4);
  s.topic_carry_prob = cfg.get_double("synth", "topic_carry_prob", 0.75);
  s.noise.gloss_fp_rate = cfg.get_double("synth", "gloss_fp_rate", 0.08);
  s.noise.gloss_miss_rate = cfg.get_double("synth", "gloss_miss_rate", 0.08);
  s.noise.caption_noise = cfg.get_double("synth", "caption_noise", 0.2);
  s.noise.feature_noise = cfg.get_double("synth", "feature_noise", 0.7);
  s.feature_dim = cfg.get_int("synth", "feature_dim", 768);
  s.window_len = cfg.get_int("synth", "window_len", 16);
  s.stride = cfg.get_int("synth", "stride", 2);
  s.fps = cfg.get_double("synth", "fps", 25.0);
  s.seed = uint64_t(cfg.get_long("synth", "seed", 0));
  s.homonym_object_prob = cfg.get_double("synth", "homonym_object_prob", 0.5);
  s.run_length = cfg.get_int("synth", "run_length", 4);
  s.validate();
  return s;
}

std::string precision_from(Config& cfg) {
  std::string p = cfg.get_string("train", "precision", "bf16");
  if (p != "bf16" && p != "f32" && p != "f64")
    throw ConfigError("precision must be bf16, f32 or f64, got '" + p + "'");
  return p;
}

void write_snapshot(const Config& cfg, const fs::path& out_target, const std::string& command) {
  fs::path dir = fs::is_directory(out_target) || !out_target.has_extension()
                     ? out_target
                     : out_target.parent_path();
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  cfg.write_snapshot(dir / (command + "_config_snapshot.ini"));
}

// vocabulary sources for a fresh model: corpus text, cue words, template
// strings, and the corpus vocab.txt when present
std::vector<std::string> vocab_texts(const Manifest& manifest, const PromptTemplate& tmpl,
                                     const std::set<std::string>& stopwords) {
  std::vector<std::string> texts = {tmpl.instruction, tmpl.prev_prompt, tmpl.pg_prompt,
                                    tmpl.bg_prompt, tmpl.vid_prompt};
  std::set<fs::path> gloss_files, caption_files;
  for (const auto& ep : manifest.episodes) {
    for (const auto& rec : ep.sentences) {
      texts.push_back(rec.gt_text);
      if (!rec.gloss_path.empty()) gloss_files.insert(rec.gloss_path);
      if (!rec.caption_path.empty()) caption_files.insert(rec.caption_path);
    }
  }
  for (const auto& f : gloss_files) {
    for_each_line(f, [&](size_t, const std::string& line) {
      auto j = nlohmann::json::parse(line);
      for (const auto& p : j.at("preds")) texts.push_back(p.at("word").get<std::string>());
    });
  }
  for (const auto& f : caption_files) {
    for_each_line(f, [&](size_t, const std::string& line) {
      auto j = nlohmann::json::parse(line);
      for (const auto& w : tokenize_caption(j.at("caption").get<std::string>()))
        if (!stopwords.count(w)) texts.push_back(w);
    });
  }
  // corpus-level vocab file (synthetic corpora ship one)
  for (const auto& ep : manifest.episodes) {
    if (ep.sentences.empty() || ep.sentences[0].feature_path.empty()) continue;
    fs::path dir = fs::path(ep.sentences[0].feature_path).parent_path().parent_path();
    if (fs::exists(dir / "vocab.txt")) {
      for_each_line(dir / "vocab.txt",
                    [&](size_t, const std::string& line) { texts.push_back(trim(line)); });
      break;
    }
  }
  return texts;
}

// ---------------------------------------------------------------------------
// Subcommand bodies, templated on scalar precision where a model is involved.

template <typename S>
int run_train(Config& cfg, const std::string& manifest_path, const std::string& out_dir,
              bool no_prev) {
  auto stopwords = stopwords_from(cfg);
  auto manifest = load_manifest(manifest_path, manifest_options(cfg, true));
  auto tmpl = prompt_from(cfg);
  auto tc = train_from(cfg);
  auto aug = augment_from(cfg);
  auto spec = decoder_spec_from(cfg);
  auto mapping = mapping_from(cfg, spec.embed_dim);
  auto adapter = adapter_from(cfg);

  CueMask policy = CueMask::parse(cfg.get_string("train", "cues", "vid,pg,prev,bg"));
  if (no_prev) {
    policy.prev = false;
    cfg.set("train", "cues", policy.to_string());
  }

  BuildOptions opts;
  opts.seed = tc.seed;
  opts.mode = parse_trainable_mode(cfg.get_string("train", "trainable", "adapters"));
  std::string precision = precision_from(cfg);
  opts.bf16_weights = precision == "bf16";

  std::map<std::string, std::string> prev_cache;
  const std::map<std::string, std::string>* cache_ptr = nullptr;
  std::string cache_path = cfg.get_string("train", "prev_cache", "");
  if (!cache_path.empty()) {
    prev_cache = load_prev_cache(cache_path);
    cache_ptr = &prev_cache;
    std::cerr << "loaded " << prev_cache.size() << " precomputed previous sentences\n";
  }

  write_snapshot(cfg, fs::path(out_dir), "train");

  size_t skipped = 0;
  auto items = prepare_items(manifest, stopwords, policy, &skipped, &std::cerr);
  std::cerr << "training on " << items.size() << " sentences (" << skipped << " skipped)\n";

  auto tokenizer = WordTokenizer::build(vocab_texts(manifest, tmpl, stopwords));
  auto model = build_model<S>(spec, mapping, adapter, std::move(tokenizer), tmpl, opts);
  std::cerr << "model: " << model.params().total_size() << " parameters, "
            << model.params().total_size(true) << " trainable\n";

  auto result = train_model(model, items, aug, tc, out_dir, cache_ptr);
  for (size_t e = 0; e < result.epoch_mean_loss.size(); ++e)
    std::cerr << "epoch " << (e + 1) << " mean loss " << result.epoch_mean_loss[e] << "\n";
  std::cout << result.last_checkpoint.string() << "\n";
  return 0;
}

template <typename S>
int run_precompute(Config& cfg, const std::string& checkpoint, const std::string& manifest_path,
                   const std::string& out_path) {
  auto stopwords = stopwords_from(cfg);
  auto manifest = load_manifest(manifest_path, manifest_options(cfg, false));
  auto ckpt = resolve_latest_checkpoint(checkpoint);
  auto model = TranslationModel<S>::load(ckpt);
  auto decoding = decoding_from(cfg);
  write_snapshot(cfg, fs::path(out_path), "precompute-prev");
  size_t skipped = 0;
  auto cache = precompute_prev_predictions(model, manifest, stopwords, decoding, out_path,
                                           ckpt.filename().string(), &skipped, &std::cerr);
  std::cerr << "wrote " << cache.size() << " predictions (" << skipped << " skipped)\n";
  return 0;
}

template <typename S>
int run_translate(Config& cfg, const std::string& checkpoint, const std::string& manifest_path,
                  const std::string& cues, const std::string& out_path, int threads) {
  auto stopwords = stopwords_from(cfg);
  auto manifest = load_manifest(manifest_path, manifest_options(cfg, false));
  auto model = TranslationModel<S>::load(resolve_latest_checkpoint(checkpoint));
  auto decoding = decoding_from(cfg);
  CueMask mask = CueMask::parse(cues);
  if (!mask.any()) throw ConfigError("translate requires a non-empty cue set");
  cfg.set("decode", "cues", mask.to_string());
  write_snapshot(cfg, fs::path(out_path), "translate");

  std::vector<std::string> warnings;
  auto hyps = translate_corpus(model, manifest, mask, decoding, stopwords, threads, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  save_hypotheses(out_path, hyps);
  std::cerr << "wrote " << hyps.size() << " hypotheses\n";
  return 0;
}

int run_evaluate(Config& cfg, const std::string& hyp_path, const std::string& manifest_path,
                 const std::string& judge_config, const std::string& out_path,
                 bool sentence_bleu) {
  auto manifest = load_manifest(manifest_path, manifest_options(cfg, false));
  auto hyps = load_hypotheses(hyp_path);
  auto lexicon = lexicon_from(cfg);

  EvalOptions opts;
  opts.sentence_bleu = sentence_bleu || cfg.get_bool("eval", "sentence_bleu", false);
  opts.iou.multiset = cfg.get_bool("eval", "iou_multiset", true);
  if (!judge_config.empty()) cfg.merge_file(judge_config);
  auto jc = judge_from(cfg);
  if (!jc.endpoint.empty()) {
    jc.validate();
    opts.judge_cfg = jc;
    opts.judge_transport = make_http_transport(jc);
  }
  if (cfg.has("external", "scorers")) {
    // [external] scorers = space-separated names, one command key per name
    for (const auto& name : split_whitespace(cfg.get_string("external", "scorers", "")))
      opts.external_scorers[name] = cfg.require_string("external", name);
  }
  write_snapshot(cfg, fs::path(out_path), "evaluate");

  auto report = evaluate_corpus(hyps, manifest, lexicon, opts);
  write_text_file(out_path, report_to_json(report).dump(2) + "\n");
  fs::path csv_path = fs::path(out_path);
  csv_path.replace_extension(".csv");
  write_text_file(csv_path, report_to_csv(report));
  std::cout << report_to_json(report)["corpus"].dump(2) << "\n";
  return 0;
}

template <typename S>
int run_ablate(Config& cfg, const std::string& checkpoint, const std::string& manifest_path,
               const std::string& out_dir, int threads) {
  auto stopwords = stopwords_from(cfg);
  auto manifest = load_manifest(manifest_path, manifest_options(cfg, false));
  auto model = TranslationModel<S>::load(resolve_latest_checkpoint(checkpoint));
  auto decoding = decoding_from(cfg);
  auto lexicon = lexicon_from(cfg);
  fs::create_directories(out_dir);
  write_snapshot(cfg, fs::path(out_dir), "ablate");

  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream csv;
  csv << "mask,bits,sentences,b4,rouge_l,cider,iou_mean,error\n";
  for (unsigned bits = 0; bits < 16; ++bits) {
    CueMask mask = CueMask::from_bits(bits);
    nlohmann::json row{{"mask", mask.to_string()}, {"bits", bits}};
    if (!mask.any()) {
      row["error"] = "empty cue mask";
      csv << mask.to_string() << "," << bits << ",0,,,,,empty cue mask\n";
      rows.push_back(std::move(row));
      continue;
    }
    auto hyps = translate_corpus(model, manifest, mask, decoding, stopwords, threads);
    save_hypotheses(fs::path(out_dir) / ("hyp_" + std::to_string(bits) + ".jsonl"), hyps);
    auto report = evaluate_corpus(hyps, manifest, lexicon);
    row["sentences"] = hyps.size();
    row["b4"] = report.corpus.b4;
    row["rouge_l"] = report.corpus.rouge_l;
    row["cider"] = report.corpus.cider ? nlohmann::json(*report.corpus.cider) : nlohmann::json();
    row["iou_mean"] = report.corpus.iou_mean;
    csv << mask.to_string() << "," << bits << "," << hyps.size() << "," << report.corpus.b4
        << "," << report.corpus.rouge_l << ","
        << (report.corpus.cider ? std::to_string(*report.corpus.cider) : "") << ","
        << report.corpus.iou_mean << ",\n";
    rows.push_back(std::move(row));
    std::cerr << "mask " << mask.to_string() << ": iou " << report.corpus.iou_mean << "\n";
  }
  write_text_file(fs::path(out_dir) / "ablation.json", rows.dump(2) + "\n");
  write_text_file(fs::path(out_dir) / "ablation.csv", csv.str());
  return 0;
}

int run_gen_synth(Config& cfg, const std::string& out_dir) {
  auto scfg = synth_from(cfg);
  const int test_episodes =
      cfg.get_int("synth", "test_episodes", std::max(1, scfg.num_episodes / 5));
  write_snapshot(cfg, fs::path(out_dir), "gen-synth");

  auto train_summary = SyntheticCorpus::generate(scfg, fs::path(out_dir) / "train");
  SyntheticConfig test_cfg = scfg;
  test_cfg.num_episodes = test_episodes;
  test_cfg.seed = splitmix64(scfg.seed ^ 0x7e57c0de);
  auto test_summary = SyntheticCorpus::generate(test_cfg, fs::path(out_dir) / "test");

  std::cerr << "train: " << train_summary.num_sentences << " sentences, mean F "
            << train_summary.mean_feature_rows << ", homonym "
            << train_summary.homonym_sentences << ", carried "
            << train_summary.carried_sentences << "\n";
  std::cerr << "test: " << test_summary.num_sentences << " sentences\n";
  std::cout << out_dir << "\n";
  return 0;
}

int run_extract_cues(Config& cfg, const std::string& manifest_path, const std::string& out_dir) {
  auto stopwords = stopwords_from(cfg);
  auto manifest = load_manifest(manifest_path, manifest_options(cfg, false));
  fs::create_directories(out_dir);
  write_snapshot(cfg, fs::path(out_dir), "extract-cues");

  std::ostringstream pg_rows, bg_rows;
  size_t done = 0;
  for (const auto& ep : manifest.episodes) {
    for (const auto& rec : ep.sentences) {
      if (!rec.gloss_path.empty()) {
        auto seq =
            extract_pseudo_glosses(load_window_predictions(rec.gloss_path, rec.sentence_id()));
        nlohmann::json glosses = nlohmann::json::array();
        for (const auto& g : seq.glosses)
          glosses.push_back({{"word", g.word},
                             {"confidence", g.confidence},
                             {"window_index", g.window_index}});
        pg_rows << nlohmann::json{{"sentence_id", rec.sentence_id()}, {"glosses", glosses}}.dump()
                << "\n";
      }
      if (!rec.caption_path.empty()) {
        auto bg = collate_background(load_captions(rec.caption_path, rec), stopwords);
        bg_rows << nlohmann::json{{"sentence_id", rec.sentence_id()},
                                  {"keywords", bg.keywords},
                                  {"source_caption_count", bg.source_caption_count}}
                       .dump()
                << "\n";
      }
      ++done;
    }
  }
  write_text_file(fs::path(out_dir) / "pseudo_glosses.jsonl", pg_rows.str());
  write_text_file(fs::path(out_dir) / "background.jsonl", bg_rows.str());
  std::cerr << "extracted cues for " << done << " sentences\n";
  return 0;
}

int run_report_correlation(Config& cfg, const std::vector<std::string>& report_paths,
                           const std::string& human_csv, const std::string& out_path) {
  if (report_paths.empty()) throw ConfigError("report-correlation needs at least one report");

  // inner join rows by sentence_id across all reports (plus the human column)
  std::map<std::string, std::map<std::string, double>> columns_by_id;
  std::set<std::string> column_names;
  auto add_value = [&](const std::string& id, const std::string& col, double v) {
    columns_by_id[id][col] = v;
    column_names.insert(col);
  };

  for (const auto& path : report_paths) {
    auto report = report_from_json(nlohmann::json::parse(read_text_file(path)));
    std::string prefix =
        report_paths.size() > 1 ? fs::path(path).stem().string() + "." : "";
    for (const auto& row : report.per_sentence) {
      add_value(row.sentence_id, prefix + "rouge_l", row.rouge_l);
      add_value(row.sentence_id, prefix + "iou", row.iou);
      if (row.b4) add_value(row.sentence_id, prefix + "b4", *row.b4);
      if (row.llm_score) add_value(row.sentence_id, prefix + "llm", *row.llm_score);
      for (const auto& [name, v] : row.external_scores)
        add_value(row.sentence_id, prefix + name, v);
    }
  }
  if (!human_csv.empty()) {
    bool header = true;
    for_each_line(human_csv, [&](size_t, const std::string& line) {
      if (header) {
        header = false;
        return;
      }
      auto comma = line.find(',');
      if (comma == std::string::npos) throw DataError("human CSV rows need sentence_id,score");
      add_value(trim(line.substr(0, comma)), "human", std::stod(line.substr(comma + 1)));
    });
  }

  std::map<std::string, std::vector<double>> columns;
  for (const auto& [id, vals] : columns_by_id) {
    if (vals.size() != column_names.size()) continue;  // incomplete row
    for (const auto& [col, v] : vals) columns[col].push_back(v);
  }
  write_snapshot(cfg, fs::path(out_path), "report-correlation");
  auto matrix = correlation_report(columns);
  write_text_file(out_path, correlation_to_json(matrix).dump(2) + "\n");
  std::cout << correlation_to_json(matrix).dump(2) << "\n";
  return 0;
}

int checkpoint_scalar_bytes(const std::string& checkpoint) {
  auto meta =
      nlohmann::json::parse(read_text_file(resolve_latest_checkpoint(checkpoint) / "meta.json"));
  return meta.at("scalar_bytes").get<int>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contextual sign language translation toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string manifest_path, out_path, checkpoint, cues = "vid,pg,prev,bg";
  std::string hyp_path, judge_config, human_csv;
  std::vector<std::string> report_paths;
  bool no_prev = false, sentence_bleu = false;
  int threads = 2;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "INI config file");
    sub->add_option("--set", common.overrides, "override section.key=value")->take_all();
  };

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic corpus (train + test)");
  add_common(gen);
  gen->add_option("--out", out_path, "output directory")->required();

  auto* extract =
      app.add_subcommand("extract-cues", "pseudo-gloss grouping + background collation");
  add_common(extract);
  extract->add_option("--manifest", manifest_path)->required();
  extract->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the translation model");
  add_common(train);
  train->add_option("--manifest", manifest_path, "overrides [data] manifest");
  train->add_option("--out", out_path, "checkpoint directory (overrides [train] out_dir)");
  train->add_flag("--no-prev", no_prev, "train the precompute variant without the prev cue");

  auto* pre = app.add_subcommand("precompute-prev", "prediction cache from a no-prev checkpoint");
  add_common(pre);
  pre->add_option("--checkpoint", checkpoint)->required();
  pre->add_option("--manifest", manifest_path)->required();
  pre->add_option("--out", out_path, "cache JSONL path")->required();

  auto* tr = app.add_subcommand("translate", "episode translation under a cue subset");
  add_common(tr);
  tr->add_option("--checkpoint", checkpoint)->required();
  tr->add_option("--manifest", manifest_path)->required();
  tr->add_option("--cues", cues, "subset of vid,pg,prev,bg (prev chains autoregressively)");
  tr->add_option("--out", out_path, "hypotheses JSONL path")->required();
  tr->add_option("--threads", threads, "parallel episodes");

  auto* ev = app.add_subcommand("evaluate", "score hypotheses against the manifest");
  add_common(ev);
  ev->add_option("--hyp", hyp_path)->required();
  ev->add_option("--manifest", manifest_path)->required();
  ev->add_option("--judge-config", judge_config, "INI file with a [judge] section");
  ev->add_flag("--sentence-bleu", sentence_bleu, "emit per-sentence smoothed BLEU");
  ev->add_option("--out", out_path, "report JSON path")->required();

  auto* ab = app.add_subcommand("ablate", "run all 16 cue masks and tabulate");
  add_common(ab);
  ab->add_option("--checkpoint", checkpoint)->required();
  ab->add_option("--manifest", manifest_path)->required();
  ab->add_option("--out", out_path, "output directory")->required();
  ab->add_option("--threads", threads, "parallel episodes");

  auto* rc = app.add_subcommand("report-correlation", "pairwise metric correlations");
  add_common(rc);
  rc->add_option("--reports", report_paths, "metric report JSON files")->required()->take_all();
  rc->add_option("--human", human_csv, "optional sentence_id,score CSV");
  rc->add_option("--out", out_path, "matrix JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc_code = app.exit(e);
    return rc_code == 0 ? 0 : 2;  // CLI misuse is a config error
  }

  try {
    Config cfg = load_config(common);
    if (gen->parsed()) return run_gen_synth(cfg, out_path);
    if (extract->parsed()) return run_extract_cues(cfg, manifest_path, out_path);

    if (train->parsed()) {
      if (!manifest_path.empty()) cfg.set("data", "manifest", manifest_path);
      if (!out_path.empty()) cfg.set("train", "out_dir", out_path);
      std::string manifest = cfg.require_string("data", "manifest");
      std::string out_dir = cfg.require_string("train", "out_dir");
      if (precision_from(cfg) == "f64") return run_train<double>(cfg, manifest, out_dir, no_prev);
      return run_train<float>(cfg, manifest, out_dir, no_prev);
    }
    if (pre->parsed()) {
      if (checkpoint_scalar_bytes(checkpoint) == 8)
        return run_precompute<double>(cfg, checkpoint, manifest_path, out_path);
      return run_precompute<float>(cfg, checkpoint, manifest_path, out_path);
    }
    if (tr->parsed()) {
      if (checkpoint_scalar_bytes(checkpoint) == 8)
        return run_translate<double>(cfg, checkpoint, manifest_path, cues, out_path, threads);
      return run_translate<float>(cfg, checkpoint, manifest_path, cues, out_path, threads);
    }
    if (ev->parsed())
      return run_evaluate(cfg, hyp_path, manifest_path, judge_config, out_path, sentence_bleu);
    if (ab->parsed()) {
      if (checkpoint_scalar_bytes(checkpoint) == 8)
        return run_ablate<double>(cfg, checkpoint, manifest_path, out_path, threads);
      return run_ablate<float>(cfg, checkpoint, manifest_path, out_path, threads);
    }
    if (rc->parsed()) return run_report_correlation(cfg, report_paths, human_csv, out_path);
    throw ConfigError("no subcommand");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
