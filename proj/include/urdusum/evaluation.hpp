#pragma once

// ROUGE-N, ROUGE-L, corpus BLEU and perplexity, plus the corpus evaluation
// that ties them to the decoder. Metrics work on token lists as given and
// never re-tokenize.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "urdusum/corpus.hpp"
#include "urdusum/decoding.hpp"
#include "urdusum/error.hpp"
#include "urdusum/model.hpp"

namespace urdusum {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static PRF from(double precision, double recall) {
    const double sum = precision + recall;
    return {precision, recall, sum > 0.0 ? 2.0 * precision * recall / sum : 0.0};
  }

  friend bool operator==(const PRF&, const PRF&) = default;
};

inline double ratio_or_zero(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

template <typename T>
std::map<std::vector<T>, std::size_t> ngram_counts(std::span<const T> tokens, std::size_t n) {
  std::map<std::vector<T>, std::size_t> counts;
  if (n == 0 || tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[std::vector<T>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

inline std::size_t ngram_total(std::size_t length, std::size_t n) { return length >= n ? length - n + 1 : 0; }

/// Sum over n-grams g of min(count_candidate(g), count_reference(g)).
template <typename T>
std::size_t clipped_matches(std::span<const T> candidate, std::span<const T> reference, std::size_t n) {
  const auto ref = ngram_counts(reference, n);
  std::size_t m = 0;
  for (const auto& [gram, count] : ngram_counts(candidate, n)) {
    auto it = ref.find(gram);
    if (it != ref.end()) m += std::min(count, it->second);
  }
  return m;
}

template <typename T>
PRF rouge_n(std::span<const T> candidate, std::span<const T> reference, std::size_t n) {
  if (n < 1) throw InvalidArgument("rouge_n needs n >= 1");
  const std::size_t m = clipped_matches(candidate, reference, n);
  return PRF::from(ratio_or_zero(m, ngram_total(candidate.size(), n)),
                   ratio_or_zero(m, ngram_total(reference.size(), n)));
}

template <typename T>
PRF rouge_n(const std::vector<T>& candidate, const std::vector<T>& reference, std::size_t n) {
  return rouge_n(std::span<const T>(candidate), std::span<const T>(reference), n);
}

template <typename T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename T>
PRF rouge_l(std::span<const T> candidate, std::span<const T> reference) {
  const std::size_t l = lcs_length(candidate, reference);
  return PRF::from(ratio_or_zero(l, candidate.size()), ratio_or_zero(l, reference.size()));
}

template <typename T>
PRF rouge_l(const std::vector<T>& candidate, const std::vector<T>& reference) {
  return rouge_l(std::span<const T>(candidate), std::span<const T>(reference));
}

/// Corpus BLEU: clipped n-gram counts summed over all pairs, geometric mean
/// of p_1..p_N times the brevity penalty. N = min(max_n, longest candidate).
template <typename T>
double corpus_bleu(const std::vector<std::vector<T>>& candidates, const std::vector<std::vector<T>>& references,
                   std::size_t max_n = 4) {
  if (candidates.size() != references.size())
    throw LengthMismatch("corpus_bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                         std::to_string(references.size()) + " references");
  if (candidates.empty()) throw LengthMismatch("corpus_bleu: no pairs");
  if (max_n < 1) throw InvalidArgument("corpus_bleu needs max_n >= 1");

  std::size_t longest = 0, cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    longest = std::max(longest, candidates[i].size());
    cand_len += candidates[i].size();
    ref_len += references[i].size();
  }
  const std::size_t orders = std::min(max_n, longest);
  if (orders == 0) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    std::size_t matched = 0, total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      matched += clipped_matches(std::span<const T>(candidates[i]), std::span<const T>(references[i]), n);
      total += ngram_total(candidates[i].size(), n);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  const double bp = cand_len < ref_len
                        ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len))
                        : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

/// exp of the teacher-forced cross-entropy summed over every scored position
/// of every pair, divided by the number of those positions.
inline double perplexity(const Parameters& p, const ModelConfig& cfg, std::span<const EncodedPair> pairs) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& pair : pairs) {
    const ScoredLoss s = scored_cross_entropy(forward_teacher_forced(pair, p, cfg), pair.target_ids);
    total += s.total;
    count += s.count;
  }
  if (count == 0) throw NoScoredPositions();
  return std::exp(total / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// Corpus evaluation

/// One held-out pair: the encoded form for decoding and perplexity, and the
/// preprocessed reference tokens that candidates are scored against.
struct EvalItem {
  std::string id;
  EncodedPair encoded;
  std::vector<std::string> reference;
};

struct EvalReport {
  PRF rouge1;
  PRF rouge2;
  PRF rougeL;
  double bleu = 0.0;
  double perplexity = 0.0;
  std::size_t n_pairs = 0;

  nlohmann::ordered_json to_json() const {
    auto prf = [](const PRF& s) { return nlohmann::ordered_json{{"p", s.precision}, {"r", s.recall}, {"f1", s.f1}}; };
    return nlohmann::ordered_json{{"rouge1", prf(rouge1)}, {"rouge2", prf(rouge2)}, {"rougeL", prf(rougeL)},
                                  {"bleu", bleu},          {"perplexity", perplexity}, {"n_pairs", n_pairs}};
  }
};

/// Arithmetic mean of per-pair scores.
inline PRF mean_prf(std::span<const PRF> scores) {
  PRF m;
  if (scores.empty()) return m;
  for (const auto& s : scores) {
    m.precision += s.precision;
    m.recall += s.recall;
    m.f1 += s.f1;
  }
  const double n = static_cast<double>(scores.size());
  return {m.precision / n, m.recall / n, m.f1 / n};
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
/// failure by index order.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  const std::size_t workers = std::min(threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Beam-decodes every item and scores it. Aggregation runs in item order, so
/// the report does not depend on `threads`.
inline EvalReport evaluate_corpus(const Parameters& p, const ModelConfig& cfg, const Vocabulary& vocab,
                                  std::span<const EvalItem> items, const DecodeConfig& dcfg = {},
                                  std::size_t threads = 1) {
  if (items.empty()) throw InvalidArgument("evaluate_corpus: no items");
  std::vector<std::vector<std::string>> candidates(items.size());
  detail::parallel_for(items.size(), threads, [&](std::size_t i) {
    candidates[i] = decode_ids(beam_search(items[i].encoded.source_ids, p, cfg, dcfg), vocab);
  });

  std::vector<PRF> r1, r2, rl;
  std::vector<std::vector<std::string>> references;
  std::vector<EncodedPair> encoded;
  for (std::size_t i = 0; i < items.size(); ++i) {
    r1.push_back(rouge_n(candidates[i], items[i].reference, 1));
    r2.push_back(rouge_n(candidates[i], items[i].reference, 2));
    rl.push_back(rouge_l(candidates[i], items[i].reference));
    references.push_back(items[i].reference);
    encoded.push_back(items[i].encoded);
  }

  EvalReport report;
  report.rouge1 = mean_prf(r1);
  report.rouge2 = mean_prf(r2);
  report.rougeL = mean_prf(rl);
  report.bleu = corpus_bleu(candidates, references);
  report.perplexity = perplexity(p, cfg, encoded);
  report.n_pairs = items.size();
  return report;
}

}  // namespace urdusum
