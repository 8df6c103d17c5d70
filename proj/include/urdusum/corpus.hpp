#pragma once

// Corpus loading, seeded train/test split, vocabulary construction and
// fixed-length id encoding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "urdusum/document.hpp"
#include "urdusum/error.hpp"
#include "urdusum/rng.hpp"

namespace urdusum {

using TokenId = std::uint32_t;
using TokenIds = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kSos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;

/// Bidirectional token/id map. Ids 0-3 are always `<pad> <s> </s> <unk>`.
class Vocabulary {
 public:
  static constexpr std::array<std::string_view, kNumReserved> kReserved = {"<pad>", "<s>", "</s>", "<unk>"};
  static constexpr std::size_t kMinSize = kNumReserved + 1;

  explicit Vocabulary(std::vector<std::string> id_to_token) : id_to_token_(std::move(id_to_token)) {
    if (id_to_token_.size() < kMinSize)
      throw InvalidArgument("vocabulary needs at least " + std::to_string(kMinSize) + " entries");
    for (std::size_t i = 0; i < kNumReserved; ++i)
      if (id_to_token_[i] != kReserved[i]) throw InvalidArgument("vocabulary id " + std::to_string(i) + " must be " + std::string(kReserved[i]));
    token_to_id_.reserve(id_to_token_.size());
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
      if (id_to_token_[i].empty()) throw InvalidArgument("vocabulary contains an empty token");
      if (!token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i)).second)
        throw InvalidArgument("vocabulary contains duplicate token '" + id_to_token_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return id_to_token_.size(); }

  std::optional<TokenId> find(std::string_view token) const {
    if (auto it = token_to_id_.find(std::string(token)); it != token_to_id_.end()) return it->second;
    return std::nullopt;
  }

  TokenId id(std::string_view token) const { return find(token).value_or(kUnk); }

  const std::string& token(TokenId id) const {
    if (id >= id_to_token_.size())
      throw IdOutOfRange("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
    return id_to_token_[id];
  }

  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

  static bool is_reserved(TokenId id) noexcept { return id < kNumReserved; }

  /// One token per line; line k holds the token with id k.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write vocabulary file " + path.string());
    for (const auto& t : id_to_token_) out << t << '\n';
    if (!out) throw Error("failed writing vocabulary file " + path.string());
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) throw ParseError(path.string(), tokens.size() + 1, "empty vocabulary entry");
      tokens.push_back(std::move(line));
    }
    try {
      return Vocabulary(std::move(tokens));
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string(), 0, e.what());
    }
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.id_to_token_ == b.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Source padded to L_src; target = SOS, tokens, EOS, PAD... of length L_tgt.
struct EncodedPair {
  TokenIds source_ids;
  TokenIds target_ids;

  friend bool operator==(const EncodedPair&, const EncodedPair&) = default;
};

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline RawDocument parse_document_line(std::string_view line, const std::string& file, std::size_t line_no) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(file, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(file, line_no, "expected a JSON object");
  for (const char* key : {"id", "text", "summary"}) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(file, line_no, std::string("missing field \"") + key + "\"");
    if (!it->is_string()) throw ParseError(file, line_no, std::string("field \"") + key + "\" must be a string");
  }
  if (obj.size() != 3) throw ParseError(file, line_no, "unexpected extra fields (expected id, text, summary)");
  RawDocument doc{obj["id"].get<std::string>(), obj["text"].get<std::string>(), obj["summary"].get<std::string>()};
  if (doc.id.empty()) throw ParseError(file, line_no, "empty id");
  if (doc.text.empty()) throw ParseError(file, line_no, "empty text");
  if (doc.summary.empty()) throw ParseError(file, line_no, "empty summary");
  return doc;
}

}  // namespace detail

/// Reads a JSONL corpus; blank lines are skipped.
inline std::vector<RawDocument> load_corpus(std::istream& in, const std::string& name = {}) {
  std::vector<RawDocument> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    RawDocument doc = detail::parse_document_line(line, name, line_no);
    if (!seen.insert(doc.id).second) throw DuplicateId(doc.id);
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline std::vector<RawDocument> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return load_corpus(in, path.string());
}

// ---------------------------------------------------------------------------
// Splitting

inline constexpr double kDefaultTrainFraction = 0.7;

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

inline std::size_t train_size(std::size_t n, double train_fraction) {
  // The epsilon absorbs representation error such as 0.7 * 10 = 6.9999...
  const auto k = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

/// Seeded shuffle, then the first floor(fraction * n) items (at least one)
/// go to train and the rest to test.
template <typename T>
Split<T> split_corpus(std::vector<T> docs, double train_fraction = kDefaultTrainFraction, std::uint64_t seed = 0) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train_fraction must lie in (0, 1)");
  if (docs.size() < 2) throw TooFewDocuments(docs.size());
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t n_train = train_size(docs.size(), train_fraction);
  Split<T> split;
  split.train.reserve(n_train);
  split.test.reserve(docs.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? split.train : split.test).push_back(std::move(docs[order[i]]));
  return split;
}

// ---------------------------------------------------------------------------
// Vocabulary

/// Counts tokens from sources and summaries, keeps those with count >=
/// min_freq ordered by descending count (ties: first occurrence), and caps
/// the total size (reserved symbols included) at max_size.
inline Vocabulary build_vocab(std::span<const TokenizedPair> pairs, std::size_t min_freq = 1,
                              std::size_t max_size = 50000) {
  if (pairs.empty()) throw InvalidArgument("build_vocab needs at least one pair");
  if (min_freq < 1) throw InvalidArgument("min_freq must be >= 1");
  if (max_size < Vocabulary::kMinSize) throw InvalidArgument("max_size must be >= 5");

  struct Entry {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> counts;
  std::vector<std::string> order;
  auto add = [&](const std::string& t) {
    auto [it, fresh] = counts.try_emplace(t, Entry{0, order.size()});
    if (fresh) order.push_back(t);
    ++it->second.count;
  };
  for (const auto& p : pairs) {
    for (const auto& t : p.source) add(t);
    for (const auto& t : p.summary) add(t);
  }

  std::vector<std::string> kept;
  for (const auto& t : order) {
    const bool reserved = std::find(Vocabulary::kReserved.begin(), Vocabulary::kReserved.end(), t) != Vocabulary::kReserved.end();
    if (!reserved && counts[t].count >= min_freq) kept.push_back(t);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [&](const std::string& a, const std::string& b) { return counts[a].count > counts[b].count; });
  if (kept.size() > max_size - kNumReserved) kept.resize(max_size - kNumReserved);
  if (kept.empty()) throw InvalidArgument("no token reaches min_freq; vocabulary would be empty");

  std::vector<std::string> tokens(Vocabulary::kReserved.begin(), Vocabulary::kReserved.end());
  tokens.insert(tokens.end(), std::make_move_iterator(kept.begin()), std::make_move_iterator(kept.end()));
  return Vocabulary(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Encoding

/// Maps tokens to ids (OOV -> UNK), optionally wraps them in SOS/EOS, and
/// truncates then PAD-pads to exactly max_len. Truncation keeps the EOS.
inline TokenIds encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len,
                       bool add_markers) {
  if (add_markers && max_len < 3) throw InvalidArgument("encode with markers needs max_len >= 3");
  TokenIds ids;
  ids.reserve(max_len);
  const std::size_t room = add_markers ? max_len - 2 : max_len;
  if (add_markers) ids.push_back(kSos);
  for (std::size_t i = 0; i < tokens.size() && i < room; ++i) ids.push_back(vocab.id(tokens[i]));
  if (add_markers) ids.push_back(kEos);
  ids.resize(max_len, kPad);
  return ids;
}

/// Drops reserved ids and stops at the first EOS.
inline std::vector<std::string> decode_ids(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  for (TokenId id : ids) {
    const std::string& tok = vocab.token(id);
    if (id == kEos) break;
    if (!Vocabulary::is_reserved(id)) tokens.push_back(tok);
  }
  return tokens;
}

inline EncodedPair encode_pair(const TokenizedPair& pair, const Vocabulary& vocab, std::size_t source_len,
                               std::size_t target_len) {
  return EncodedPair{encode(pair.source, vocab, source_len, false), encode(pair.summary, vocab, target_len, true)};
}

/// Position of the EOS in a target sequence, i.e. the number of scored steps.
inline std::size_t eos_index(std::span<const TokenId> target) {
  auto it = std::find(target.begin(), target.end(), kEos);
  if (it == target.end()) throw InvalidArgument("target sequence has no EOS");
  return static_cast<std::size_t>(it - target.begin());
}

/// Checks the EncodedPair contract against a vocabulary size and lengths.
inline void validate_pair(const EncodedPair& pair, std::size_t vocab_size, std::size_t source_len,
                          std::size_t target_len) {
  if (pair.source_ids.size() != source_len)
    throw ShapeMismatch("source length " + std::to_string(pair.source_ids.size()) + " != " + std::to_string(source_len));
  if (pair.target_ids.size() != target_len)
    throw ShapeMismatch("target length " + std::to_string(pair.target_ids.size()) + " != " + std::to_string(target_len));
  for (TokenId id : pair.source_ids)
    if (id >= vocab_size) throw IdOutOfRange("source id " + std::to_string(id) + " >= vocabulary size");
  for (TokenId id : pair.target_ids)
    if (id >= vocab_size) throw IdOutOfRange("target id " + std::to_string(id) + " >= vocabulary size");
  const auto& t = pair.target_ids;
  if (t.empty() || t[0] != kSos) throw InvalidArgument("target must start with SOS");
  const std::size_t eos = eos_index(t);
  if (std::count(t.begin(), t.end(), kEos) != 1) throw InvalidArgument("target must contain exactly one EOS");
  for (std::size_t i = 1; i < eos; ++i)
    if (t[i] == kPad || t[i] == kSos) throw InvalidArgument("PAD or SOS inside target before EOS");
  for (std::size_t i = eos + 1; i < t.size(); ++i)
    if (t[i] != kPad) throw InvalidArgument("non-PAD id after EOS in target");
}

}  // namespace urdusum
