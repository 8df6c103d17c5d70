#pragma once

// Greedy decoding and beam search over the encoder-decoder.
//
// Candidates are every id except PAD and SOS, so outputs never contain them.
// Both decoders rank by cumulative log-probability computed the same way, so
// a beam of one reproduces greedy exactly, ties included.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "urdusum/corpus.hpp"
#include "urdusum/error.hpp"
#include "urdusum/model.hpp"
#include "urdusum/numerics.hpp"
#include "urdusum/preprocess.hpp"

namespace urdusum {

inline constexpr std::size_t kDefaultBeamSize = 3;
inline constexpr std::size_t kDefaultMaxSummaryLen = 64;

struct DecodeConfig {
  std::size_t beam_size = kDefaultBeamSize;
  std::size_t max_len = kDefaultMaxSummaryLen;
  double length_penalty_alpha = 0.0;

  void validate() const {
    if (beam_size < 1) throw InvalidArgument("beam_size must be >= 1");
    if (max_len < 1) throw InvalidArgument("max_len must be >= 1");
    if (!std::isfinite(length_penalty_alpha) || length_penalty_alpha < 0.0)
      throw InvalidArgument("length_penalty_alpha must be finite and >= 0");
  }
};

/// A partial or complete decode. ids starts with SOS.
struct Hypothesis {
  TokenIds ids;
  double log_prob = 0.0;
  bool finished = false;

  std::size_t emitted() const noexcept { return ids.empty() ? 0 : ids.size() - 1; }
  /// The emitted ids, without the leading SOS.
  TokenIds output() const { return ids.empty() ? TokenIds{} : TokenIds(ids.begin() + 1, ids.end()); }
};

inline bool is_candidate_id(TokenId id) noexcept { return id != kPad && id != kSos; }

inline double hypothesis_score(double log_prob, std::size_t emitted, double alpha) {
  if (alpha == 0.0 || emitted == 0) return log_prob;
  return log_prob / std::pow(static_cast<double>(emitted), alpha);
}

namespace detail {

inline void check_decode_inputs(std::span<const TokenId> source, const Parameters& p, const ModelConfig& cfg,
                                const DecodeConfig& dcfg) {
  dcfg.validate();
  cfg.validate();
  p.check_shapes(cfg);
  if (source.size() != cfg.max_source_len)
    throw ShapeMismatch("source length " + std::to_string(source.size()) + " != " +
                        std::to_string(cfg.max_source_len));
}

/// a ranks before b: higher score, then shorter, then lexicographically smaller.
inline bool ranks_before(double score_a, std::span<const TokenId> a, double score_b, std::span<const TokenId> b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.size() != b.size()) return a.size() < b.size();
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

/// Next-token log-probabilities from the encoder-decoder. The state is the
/// decoder state reached after consuming the hypothesis so far.
class ModelScorer {
 public:
  using State = DecoderState;

  ModelScorer(std::span<const TokenId> source, const Parameters& p, const ModelConfig& cfg)
      : enc_(encode_sequence(source, p, cfg)), p_(p), cfg_(cfg) {}

  State initial() const { return initial_decoder_state(enc_); }

  /// Feeds `prev` and returns (log-probabilities over the vocabulary, new state).
  std::pair<Vector, State> step(const State& st, TokenId prev) const {
    DecoderStepResult r = decoder_step(prev, st, enc_, p_, cfg_);
    return {log_softmax(r.logits), std::move(r.state)};
  }

 private:
  EncoderOutput enc_;
  const Parameters& p_;
  const ModelConfig& cfg_;
};

/// Argmax decoding from SOS until EOS or max_len emitted ids; ties go to the
/// smallest id. `scorer` provides State, initial() and step(state, prev).
template <typename Scorer>
Hypothesis greedy_search(const Scorer& scorer, const DecodeConfig& dcfg) {
  dcfg.validate();
  Hypothesis hyp{{kSos}, 0.0, false};
  typename Scorer::State st = scorer.initial();
  while (hyp.emitted() < dcfg.max_len) {
    auto [lp, next] = scorer.step(st, hyp.ids.back());
    TokenId best = kEos;
    double best_total = hyp.log_prob + lp[kEos];
    for (TokenId v = 0; v < lp.size(); ++v) {
      if (!is_candidate_id(v)) continue;
      const double total = hyp.log_prob + lp[v];
      if (total > best_total || (total == best_total && v < best)) {
        best = v;
        best_total = total;
      }
    }
    hyp.ids.push_back(best);
    hyp.log_prob = best_total;
    if (best == kEos) {
      hyp.finished = true;
      break;
    }
    st = std::move(next);
  }
  return hyp;
}

/// Beam search over any scorer.
///
/// Each step expands every live hypothesis over the candidate ids and keeps
/// the beam_size best expansions. Those ending in EOS move to the finished
/// pool, the rest stay live. Stops when nothing is live or max_len ids have
/// been emitted, then ranks the finished pool together with whatever is
/// still live (those have hit max_len and are complete too) and the greedy
/// decode.
template <typename Scorer>
Hypothesis beam_search_with(const Scorer& scorer, const DecodeConfig& dcfg) {
  dcfg.validate();
  const double alpha = dcfg.length_penalty_alpha;
  using State = typename Scorer::State;

  struct Live {
    Hypothesis hyp;
    State state;
  };
  struct Expansion {
    std::size_t parent;
    TokenId token;
    double log_prob;
    double score;
  };

  std::vector<Live> live;
  live.push_back({Hypothesis{{kSos}, 0.0, false}, scorer.initial()});
  std::vector<Hypothesis> finished;

  for (std::size_t len = 1; len <= dcfg.max_len && !live.empty(); ++len) {
    std::vector<Expansion> expansions;
    std::vector<State> next_states;
    for (std::size_t k = 0; k < live.size(); ++k) {
      auto [lp, next] = scorer.step(live[k].state, live[k].hyp.ids.back());
      for (TokenId v = 0; v < lp.size(); ++v) {
        if (!is_candidate_id(v)) continue;
        const double total = live[k].hyp.log_prob + lp[v];
        expansions.push_back({k, v, total, hypothesis_score(total, len, alpha)});
      }
      next_states.push_back(std::move(next));
    }

    // All expansions have the same length, so comparing parent ids then the
    // new token is the full lexicographic order.
    auto before = [&](const Expansion& a, const Expansion& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) {
        const auto& ia = live[a.parent].hyp.ids;
        const auto& ib = live[b.parent].hyp.ids;
        return std::lexicographical_compare(ia.begin(), ia.end(), ib.begin(), ib.end());
      }
      return a.token < b.token;
    };
    const std::size_t keep = std::min(dcfg.beam_size, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(),
                      before);

    std::vector<Live> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Expansion& e = expansions[i];
      Hypothesis h = live[e.parent].hyp;
      h.ids.push_back(e.token);
      h.log_prob = e.log_prob;
      if (e.token == kEos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back({std::move(h), next_states[e.parent]});
      }
    }
    live = std::move(next);
  }

  std::vector<Hypothesis> pool = std::move(finished);
  for (auto& l : live) pool.push_back(std::move(l.hyp));
  // Pruning can drop the greedy prefix, after which every surviving beam may
  // end below the greedy sequence. Ranking the greedy decode alongside the
  // beams keeps the result at least as probable as greedy.
  if (dcfg.beam_size > 1) pool.push_back(greedy_search(scorer, dcfg));
  if (pool.empty()) throw InvalidArgument("beam search produced no hypothesis");
  return *std::min_element(pool.begin(), pool.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    return detail::ranks_before(hypothesis_score(a.log_prob, a.emitted(), alpha), a.ids,
                                hypothesis_score(b.log_prob, b.emitted(), alpha), b.ids);
  });
}

/// Greedy decode of one source. Returns the emitted ids (EOS included when
/// produced, SOS excluded).
inline TokenIds greedy_decode(std::span<const TokenId> source, const Parameters& p, const ModelConfig& cfg,
                              const DecodeConfig& dcfg = {}) {
  detail::check_decode_inputs(source, p, cfg, dcfg);
  return greedy_search(ModelScorer(source, p, cfg), dcfg).output();
}

inline Hypothesis beam_search_hypothesis(std::span<const TokenId> source, const Parameters& p, const ModelConfig& cfg,
                                         const DecodeConfig& dcfg = {}) {
  detail::check_decode_inputs(source, p, cfg, dcfg);
  return beam_search_with(ModelScorer(source, p, cfg), dcfg);
}

inline TokenIds beam_search(std::span<const TokenId> source, const Parameters& p, const ModelConfig& cfg,
                            const DecodeConfig& dcfg = {}) {
  return beam_search_hypothesis(source, p, cfg, dcfg).output();
}

/// Total log-probability the model assigns to emitting `output` (ids after
/// SOS) for this source.
inline double sequence_log_prob(std::span<const TokenId> source, std::span<const TokenId> output,
                                const Parameters& p, const ModelConfig& cfg) {
  const EncoderOutput enc = encode_sequence(source, p, cfg);
  DecoderState st = initial_decoder_state(enc);
  TokenId prev = kSos;
  double total = 0.0;
  for (TokenId id : output) {
    DecoderStepResult step = decoder_step(prev, st, enc, p, cfg);
    if (id >= step.logits.size()) throw IdOutOfRange("output id " + std::to_string(id) + " >= vocabulary size");
    total += log_softmax(step.logits)[id];
    st = std::move(step.state);
    prev = id;
  }
  return total;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

/// Raw text to summary string: preprocess, encode, beam search, detokenize.
inline std::string summarize(std::string_view text, const Pipeline& pipeline, const Vocabulary& vocab,
                             const Parameters& p, const ModelConfig& cfg, const DecodeConfig& dcfg = {}) {
  const std::vector<std::string> tokens = pipeline.source_tokens(text);
  const TokenIds source = encode(tokens, vocab, cfg.max_source_len, false);
  const TokenIds ids = beam_search(source, p, cfg, dcfg);
  return join_tokens(decode_ids(ids, vocab));
}

}  // namespace urdusum
