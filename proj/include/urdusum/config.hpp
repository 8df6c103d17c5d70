#pragma once

// Run configuration: one JSON file describing inputs, outputs and every
// tunable, plus the command-line overrides layered on top.
//
//   {
//     "paths":    {"corpus": ..., "normalization": ..., "lemma_rules": ...,
//                  "stopwords": ..., "preprocessed": ..., "checkpoint": ...,
//                  "test_ids": ..., "report": ...},
//     "pipeline": {"max_source_tokens": 400, "hyphen_is_delimiter": false,
//                  "filter_summary_stopwords": true},
//     "vocab":    {"min_freq": 1, "max_size": 50000},
//     "model":    {"embedding_dim": 64, "hidden_dim": 128, "num_layers": 1,
//                  "max_source_len": 400, "max_target_len": 64},
//     "train":    {"epochs": 20, "batch_size": 8, "learning_rate": 0.001,
//                  "optimizer": "adam", "beta1": 0.9, "beta2": 0.999,
//                  "epsilon": 1e-8, "grad_clip": 5, "seed": 1,
//                  "train_fraction": 0.7, "init_scale": 0.08},
//     "decode":   {"beam_size": 3, "max_len": 64, "length_penalty_alpha": 0}
//   }
//
// Every section and key is optional except the four input paths. Unknown
// keys are rejected. Relative paths resolve against the config file's
// directory.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "urdusum/corpus.hpp"
#include "urdusum/decoding.hpp"
#include "urdusum/error.hpp"
#include "urdusum/io.hpp"
#include "urdusum/model.hpp"
#include "urdusum/preprocess.hpp"
#include "urdusum/training.hpp"

namespace urdusum {

inline constexpr const char* kThreadsEnvVar = "URDU_ABSSUM_THREADS";

struct RunPaths {
  std::filesystem::path corpus;
  std::filesystem::path normalization;
  std::filesystem::path lemma_rules;
  std::filesystem::path stopwords;
  std::filesystem::path preprocessed;
  std::filesystem::path checkpoint;
  std::filesystem::path test_ids;
  std::filesystem::path report;
};

struct VocabConfig {
  std::size_t min_freq = 1;
  std::size_t max_size = 50000;
};

struct RunConfig {
  RunPaths paths;
  PipelineConfig pipeline;
  VocabConfig vocab;
  ModelConfig model;  // vocab_size is filled in from the built vocabulary
  TrainConfig train;
  double train_fraction = kDefaultTrainFraction;
  double init_scale = 0.08;
  DecodeConfig decode;
};

/// Values given on the command line; unset fields keep the config value.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> beam;
  std::optional<std::size_t> max_len;
  std::optional<double> alpha;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
};

inline void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.beam) cfg.decode.beam_size = *o.beam;
  if (o.max_len) cfg.decode.max_len = *o.max_len;
  if (o.alpha) cfg.decode.length_penalty_alpha = *o.alpha;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.lr) cfg.train.learning_rate = *o.lr;
}

/// Worker count from URDU_ABSSUM_THREADS; 0 (all cores) when unset.
inline std::size_t threads_from_env() {
  const char* raw = std::getenv(kThreadsEnvVar);
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  const long long v = std::strtoll(raw, &end, 10);
  if (*end != '\0' || v < 1) throw InvalidArgument(std::string(kThreadsEnvVar) + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

namespace detail {

class Section {
 public:
  Section(const nlohmann::json& root, const char* name, const std::string& file)
      : file_(file), name_(name) {
    if (!root.contains(name)) return;
    obj_ = root.at(name);
    if (!obj_.is_object()) fail("must be an object");
  }

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      dst = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(std::string("'") + key + "' has the wrong type");
    }
  }

  void read_path(const char* key, std::filesystem::path& dst, const std::filesystem::path& base) {
    std::string raw;
    read(key, raw);
    if (!raw.empty()) dst = base / std::filesystem::path(raw);
  }

  void reject_unknown() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.contains(key)) fail("unknown key '" + key + "'");
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(file_, 0, name_ + ": " + what); }

 private:
  std::string file_;
  std::string name_;
  nlohmann::json obj_ = nlohmann::json::object();
  std::set<std::string> seen_;
};

}  // namespace detail

/// Parses a config document. `base` is the directory relative paths resolve
/// against. Does not touch the file system.
inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base,
                                  const std::string& file = {}) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(file, 0, e.what());
  }
  if (!root.is_object()) throw ParseError(file, 0, "config must be a JSON object");
  static const std::set<std::string> sections{"paths", "pipeline", "vocab", "model", "train", "decode"};
  for (const auto& [key, value] : root.items())
    if (!sections.contains(key)) throw ParseError(file, 0, "unknown section '" + key + "'");

  RunConfig cfg;
  {
    detail::Section s(root, "paths", file);
    auto& p = cfg.paths;
    s.read_path("corpus", p.corpus, base);
    s.read_path("normalization", p.normalization, base);
    s.read_path("lemma_rules", p.lemma_rules, base);
    s.read_path("stopwords", p.stopwords, base);
    s.read_path("preprocessed", p.preprocessed, base);
    s.read_path("checkpoint", p.checkpoint, base);
    s.read_path("test_ids", p.test_ids, base);
    s.read_path("report", p.report, base);
    s.reject_unknown();
    if (p.preprocessed.empty()) p.preprocessed = base / "preprocessed.jsonl";
    if (p.checkpoint.empty()) p.checkpoint = base / "model.ckpt";
    if (p.test_ids.empty()) p.test_ids = base / "test_ids.txt";
    if (p.report.empty()) p.report = base / "report.json";
  }
  {
    detail::Section s(root, "pipeline", file);
    s.read("max_source_tokens", cfg.pipeline.max_source_tokens);
    s.read("hyphen_is_delimiter", cfg.pipeline.hyphen_is_delimiter);
    s.read("filter_summary_stopwords", cfg.pipeline.filter_summary_stopwords);
    s.reject_unknown();
    if (cfg.pipeline.max_source_tokens == 0) s.fail("max_source_tokens must be >= 1");
  }
  {
    detail::Section s(root, "vocab", file);
    s.read("min_freq", cfg.vocab.min_freq);
    s.read("max_size", cfg.vocab.max_size);
    s.reject_unknown();
  }
  {
    detail::Section s(root, "model", file);
    s.read("embedding_dim", cfg.model.embedding_dim);
    s.read("hidden_dim", cfg.model.hidden_dim);
    s.read("num_layers", cfg.model.num_layers);
    s.read("max_source_len", cfg.model.max_source_len);
    s.read("max_target_len", cfg.model.max_target_len);
    s.reject_unknown();
    ModelConfig probe = cfg.model;
    probe.vocab_size = Vocabulary::kMinSize;
    try {
      probe.validate();
    } catch (const InvalidArgument& e) {
      s.fail(e.what());
    }
  }
  {
    detail::Section s(root, "train", file);
    auto& t = cfg.train;
    std::string optimizer = "adam";
    s.read("epochs", t.epochs);
    s.read("batch_size", t.batch_size);
    s.read("learning_rate", t.learning_rate);
    s.read("optimizer", optimizer);
    s.read("beta1", t.beta1);
    s.read("beta2", t.beta2);
    s.read("epsilon", t.epsilon);
    s.read("grad_clip", t.grad_clip);
    s.read("seed", t.seed);
    s.read("train_fraction", cfg.train_fraction);
    s.read("init_scale", cfg.init_scale);
    s.reject_unknown();
    if (optimizer == "adam") t.optimizer = OptimizerKind::adam;
    else if (optimizer == "sgd") t.optimizer = OptimizerKind::sgd;
    else s.fail("optimizer must be \"adam\" or \"sgd\"");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) s.fail("train_fraction must be in (0, 1)");
    if (!(cfg.init_scale > 0.0)) s.fail("init_scale must be > 0");
    try {
      t.validate();
    } catch (const InvalidArgument& e) {
      s.fail(e.what());
    }
  }
  {
    detail::Section s(root, "decode", file);
    s.read("beam_size", cfg.decode.beam_size);
    s.read("max_len", cfg.decode.max_len);
    s.read("length_penalty_alpha", cfg.decode.length_penalty_alpha);
    s.reject_unknown();
    try {
      cfg.decode.validate();
    } catch (const InvalidArgument& e) {
      s.fail(e.what());
    }
  }
  return cfg;
}

/// Loads a config file and checks that every input path exists.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg = parse_run_config(read_file(path), path.parent_path(), path.string());
  const std::pair<const char*, const std::filesystem::path*> inputs[] = {
      {"corpus", &cfg.paths.corpus},
      {"normalization", &cfg.paths.normalization},
      {"lemma_rules", &cfg.paths.lemma_rules},
      {"stopwords", &cfg.paths.stopwords}};
  for (const auto& [key, p] : inputs) {
    if (p->empty()) throw ParseError(path.string(), 0, std::string("paths: '") + key + "' is required");
    if (!std::filesystem::exists(*p))
      throw ParseError(path.string(), 0, std::string("paths: ") + key + " '" + p->string() + "' does not exist");
  }
  cfg.train.threads = threads_from_env();
  return cfg;
}

}  // namespace urdusum
