#pragma once

// The four pipeline stages behind the command-line tool. Each returns a
// process exit code; failures are mapped by exit_code_for().
//
//   preprocess  corpus JSONL            -> preprocessed JSONL
//   train       preprocessed JSONL      -> checkpoint + held-out id list
//   summarize   {id, text} JSONL        -> {id, summary} / {id, error} JSONL
//   evaluate    checkpoint + held-out   -> report JSON

#include <algorithm>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "urdusum/checkpoint.hpp"
#include "urdusum/config.hpp"
#include "urdusum/corpus.hpp"
#include "urdusum/decoding.hpp"
#include "urdusum/error.hpp"
#include "urdusum/evaluation.hpp"
#include "urdusum/io.hpp"
#include "urdusum/preprocess.hpp"
#include "urdusum/training.hpp"

namespace urdusum {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitParse = 2, kExitTraining = 3, kExitEvaluation = 4 };

class EmptyEvaluationSplit : public Error {
 public:
  EmptyEvaluationSplit() : Error("evaluation split is empty") {}
};

/// Maps the exception currently being handled to an exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return kExitParse;
  if (dynamic_cast<const NonFiniteLoss*>(&e)) return kExitTraining;
  if (dynamic_cast<const EmptyEvaluationSplit*>(&e)) return kExitEvaluation;
  return kExitFailure;
}

// ---------------------------------------------------------------------------
// Tokenized corpus file

inline std::string tokenized_to_jsonl(const TokenizedPair& p) {
  return nlohmann::ordered_json{{"id", p.id}, {"source_tokens", p.source}, {"summary_tokens", p.summary}}.dump();
}

inline std::vector<TokenizedPair> load_tokenized(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<TokenizedPair> out;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      TokenizedPair p{obj.at("id").get<std::string>(), obj.at("source_tokens").get<std::vector<std::string>>(),
                      obj.at("summary_tokens").get<std::vector<std::string>>()};
      if (!ids.insert(p.id).second) throw ParseError(path.string(), line_no, "duplicate id '" + p.id + "'");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

inline std::vector<std::string> load_id_list(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ids.push_back(line);
  return ids;
}

inline Pipeline load_pipeline(const RunConfig& cfg) {
  return Pipeline::load(cfg.paths.normalization, cfg.paths.lemma_rules, cfg.paths.stopwords, cfg.pipeline);
}

// ---------------------------------------------------------------------------
// Commands

/// Preprocesses every document. Documents whose source or summary ends up
/// empty are dropped and counted.
inline int cmd_preprocess(const RunConfig& cfg, std::ostream& log) {
  const auto docs = load_corpus(cfg.paths.corpus);
  const Pipeline pipeline = load_pipeline(cfg);
  std::string out;
  std::size_t written = 0, dropped = 0;
  for (const auto& doc : docs) {
    try {
      TokenizedPair p = preprocess_pipeline(doc, pipeline);
      if (p.summary.empty()) throw EmptyAfterPreprocessing();
      out += tokenized_to_jsonl(p);
      out += '\n';
      ++written;
    } catch (const EmptyAfterPreprocessing&) {
      ++dropped;
    }
  }
  write_file_atomic(cfg.paths.preprocessed, out);
  log << nlohmann::ordered_json{{"written", written}, {"dropped", dropped}}.dump() << '\n';
  return kExitOk;
}

/// Splits, builds the vocabulary from the training side, trains and saves
/// the checkpoint plus the held-out ids (one per line, split order).
inline int cmd_train(const RunConfig& cfg, std::ostream& log) {
  auto split = split_corpus(load_tokenized(cfg.paths.preprocessed), cfg.train_fraction, cfg.train.seed);
  const Vocabulary vocab = build_vocab(split.train, cfg.vocab.min_freq, cfg.vocab.max_size);

  ModelConfig model = cfg.model;
  model.vocab_size = vocab.size();
  std::vector<EncodedPair> encoded;
  for (const auto& p : split.train)
    encoded.push_back(encode_pair(p, vocab, model.max_source_len, model.max_target_len));

  Parameters params = Parameters::initialize(model, cfg.train.seed, cfg.init_scale);
  train(encoded, params, model, cfg.train, [&](const TrainStats& s) {
    log << nlohmann::ordered_json{{"epoch", s.epoch}, {"loss", s.mean_loss}, {"ppl", s.perplexity},
                                  {"sec", s.wall_seconds}}
               .dump()
        << '\n'
        << std::flush;
  });

  std::string ids;
  for (const auto& p : split.test) ids += p.id + '\n';
  save_checkpoint(Checkpoint{model, vocab, std::move(params), cfg.train.seed, cfg.train.epochs}, cfg.paths.checkpoint);
  write_file_atomic(cfg.paths.test_ids, ids);
  return kExitOk;
}

/// One output line per non-blank input line. Documents that cannot be
/// summarized get an inline error instead of aborting the batch.
inline int cmd_summarize(const RunConfig& cfg, const std::filesystem::path& input, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(cfg.paths.checkpoint);
  const Pipeline pipeline = load_pipeline(cfg);
  std::istringstream in(read_file(input));
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    nlohmann::json obj;
    std::string id, text;
    try {
      obj = nlohmann::json::parse(line);
      id = obj.at("id").get<std::string>();
      text = obj.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(input.string(), line_no, e.what());
    }
    nlohmann::ordered_json result{{"id", id}};
    try {
      result["summary"] = summarize(text, pipeline, ck.vocab, ck.params, ck.model, cfg.decode);
    } catch (const Error& e) {
      result["error"] = e.what();
    }
    out << result.dump() << '\n';
  }
  return kExitOk;
}

/// Evaluates on the held-out ids, or with on_train on every other pair.
/// Writes the report file and echoes it to `out`.
inline int cmd_evaluate(const RunConfig& cfg, bool on_train, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(cfg.paths.checkpoint);
  const auto pairs = load_tokenized(cfg.paths.preprocessed);
  const auto held_out_list = load_id_list(cfg.paths.test_ids);
  const std::unordered_set<std::string> held_out(held_out_list.begin(), held_out_list.end());

  std::vector<EvalItem> items;
  for (const auto& p : pairs) {
    if (held_out.contains(p.id) == on_train) continue;
    items.push_back({p.id, encode_pair(p, ck.vocab, ck.model.max_source_len, ck.model.max_target_len), p.summary});
  }
  if (items.empty()) throw EmptyEvaluationSplit();

  const EvalReport report = evaluate_corpus(ck.params, ck.model, ck.vocab, items, cfg.decode, cfg.train.threads);
  const std::string json = report.to_json().dump(2) + '\n';
  write_file_atomic(cfg.paths.report, json);
  out << json;
  return kExitOk;
}

}  // namespace urdusum
