#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <urdusum/corpus.hpp>
#include <urdusum/model.hpp>
#include <urdusum/rng.hpp>

namespace urdusum::testing {

inline ModelConfig tiny_config(std::size_t layers = 1, std::size_t vocab = 20) {
  ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 16;
  cfg.num_layers = layers;
  cfg.max_source_len = 6;
  cfg.max_target_len = 5;
  return cfg;
}

/// Random valid pair: 1..L_src real source tokens, 0..L_tgt-2 target tokens.
inline EncodedPair random_pair(Rng& rng, const ModelConfig& cfg, std::size_t min_target_tokens = 0) {
  auto token = [&] { return static_cast<TokenId>(kUnk + rng.below(cfg.vocab_size - kUnk)); };
  EncodedPair pair;
  const std::size_t n_src = 1 + rng.below(cfg.max_source_len);
  for (std::size_t i = 0; i < cfg.max_source_len; ++i) pair.source_ids.push_back(i < n_src ? token() : kPad);
  const std::size_t room = cfg.max_target_len - 2;
  const std::size_t n_tgt = min_target_tokens + rng.below(room - min_target_tokens + 1);
  pair.target_ids.push_back(kSos);
  for (std::size_t i = 0; i < n_tgt; ++i) pair.target_ids.push_back(token());
  pair.target_ids.push_back(kEos);
  pair.target_ids.resize(cfg.max_target_len, kPad);
  return pair;
}

inline TokenIds random_source(Rng& rng, const ModelConfig& cfg) { return random_pair(rng, cfg).source_ids; }

}  // namespace urdusum::testing
