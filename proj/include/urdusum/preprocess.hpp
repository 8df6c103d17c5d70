#pragma once

// Urdu text preprocessing: normalization, sentence and word tokenization,
// suffix-rule lemmatization, stopword removal and frequency-based sentence
// ranking. Everything here is a pure function over immutable tables.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "urdusum/document.hpp"
#include "urdusum/error.hpp"
#include "urdusum/utf8.hpp"

namespace urdusum {

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      return fields;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

inline bool is_comment_or_blank(std::string_view line) {
  const auto first = line.find_first_not_of(" \t");
  return first == std::string_view::npos || line[first] == '#';
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Normalization

/// Codepoint canonicalization map plus the set of codepoints to delete.
/// Invariants: the map is idempotent (no target is itself a key) and no
/// codepoint is both mapped and stripped.
struct NormalizationTable {
  std::map<char32_t, char32_t> char_map;
  std::set<char32_t> strip_set;

  void validate() const {
    for (const auto& [src, dst] : char_map) {
      if (strip_set.contains(src))
        throw InvalidArgument("normalization: codepoint is both mapped and stripped");
      if (char_map.contains(dst))
        throw InvalidArgument("normalization: mapping target is itself mapped (chain or cycle)");
      if (strip_set.contains(dst)) throw InvalidArgument("normalization: mapping target is stripped");
    }
  }

  /// Parses `SRC_HEX<TAB>DST_HEX` / `SRC_HEX<TAB>STRIP` lines. Blank lines and
  /// `#` comments are skipped.
  static NormalizationTable parse(std::istream& in, const std::string& name = {}) {
    NormalizationTable table;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string_view line = detail::strip_cr(raw);
      if (detail::is_comment_or_blank(line)) continue;
      const auto fields = detail::split_tabs(line);
      if (fields.size() != 2) throw ParseError(name, line_no, "expected two tab-separated fields");
      const char32_t src = parse_hex(fields[0], name, line_no);
      if (table.char_map.contains(src) || table.strip_set.contains(src))
        throw ParseError(name, line_no, "codepoint listed twice");
      if (fields[1] == "STRIP") {
        table.strip_set.insert(src);
      } else {
        table.char_map.emplace(src, parse_hex(fields[1], name, line_no));
      }
    }
    try {
      table.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(name, 0, e.what());
    }
    return table;
  }

  static NormalizationTable load(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse(in, path.string());
  }

 private:
  static char32_t parse_hex(std::string_view field, const std::string& name, std::size_t line_no) {
    if (field.starts_with("U+") || field.starts_with("u+")) field.remove_prefix(2);
    if (field.empty() || field.size() > 6) throw ParseError(name, line_no, "bad codepoint '" + std::string(field) + "'");
    std::uint32_t value = 0;
    for (char ch : field) {
      value <<= 4;
      if (ch >= '0' && ch <= '9') value |= static_cast<std::uint32_t>(ch - '0');
      else if (ch >= 'a' && ch <= 'f') value |= static_cast<std::uint32_t>(ch - 'a' + 10);
      else if (ch >= 'A' && ch <= 'F') value |= static_cast<std::uint32_t>(ch - 'A' + 10);
      else throw ParseError(name, line_no, "bad codepoint '" + std::string(field) + "'");
    }
    if (value > 0x10FFFF || (value >= 0xD800 && value <= 0xDFFF))
      throw ParseError(name, line_no, "codepoint out of range");
    return static_cast<char32_t>(value);
  }
};

namespace detail {

inline std::string map_and_strip(std::string_view text, const NormalizationTable& table) {
  std::u32string out;
  for (char32_t cp : utf8::decode(text)) {
    if (table.strip_set.contains(cp)) continue;
    if (auto it = table.char_map.find(cp); it != table.char_map.end()) cp = it->second;
    out.push_back(cp);
  }
  return utf8::encode(out);
}

inline std::string collapse_whitespace(std::string_view text) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t cp : utf8::decode(text)) {
    if (utf8::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return utf8::encode(out);
}

}  // namespace detail

/// Canonicalizes letters, deletes diacritics, composes to NFC and collapses
/// whitespace runs to single spaces (trimmed). Idempotent.
inline std::string normalize_text(std::string_view raw, const NormalizationTable& table) {
  // Composing first lets decomposed input (e.g. yeh + hamza above) reach the
  // same precomposed form as already-composed input before letters are mapped.
  std::string current(raw);
  for (int round = 0; round < 8; ++round) {
    std::string next = detail::collapse_whitespace(utf8::nfc(detail::map_and_strip(utf8::nfc(current), table)));
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

// ---------------------------------------------------------------------------
// Tokenization

inline bool is_sentence_delimiter(char32_t cp, bool hyphen_is_delimiter = false) {
  switch (cp) {
    case U'۔':  // arabic full stop
    case U'؟':  // arabic question mark
    case U'!':
    case U'?':
    case U'.':
    case U'\n':
      return true;
    case U'-':
      return hyphen_is_delimiter;
    default:
      return false;
  }
}

/// Splits on sentence delimiters. Sentences are trimmed; empty ones dropped.
inline std::vector<std::string> sentence_tokenize(std::string_view text, bool hyphen_is_delimiter = false) {
  std::vector<std::string> sentences;
  std::u32string current;
  auto flush = [&] {
    std::size_t begin = 0;
    std::size_t end = current.size();
    while (begin < end && utf8::is_space(current[begin])) ++begin;
    while (end > begin && utf8::is_space(current[end - 1])) --end;
    if (end > begin) sentences.push_back(utf8::encode(std::u32string_view(current).substr(begin, end - begin)));
    current.clear();
  };
  for (char32_t cp : utf8::decode(text)) {
    if (is_sentence_delimiter(cp, hyphen_is_delimiter)) {
      flush();
    } else {
      current.push_back(cp);
    }
  }
  flush();
  return sentences;
}

/// Whitespace split; every punctuation codepoint becomes its own token.
inline std::vector<std::string> word_tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(utf8::encode(current));
    current.clear();
  };
  for (char32_t cp : utf8::decode(sentence)) {
    if (utf8::is_space(cp)) {
      flush();
    } else if (utf8::is_punct(cp)) {
      flush();
      tokens.push_back(utf8::encode(std::u32string(1, cp)));
    } else {
      current.push_back(cp);
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Lemmatization

struct SuffixRule {
  std::string suffix;
  std::string replacement;

  friend bool operator==(const SuffixRule&, const SuffixRule&) = default;
};

/// Exception lemmas plus suffix rules kept in descending suffix length
/// (codepoints); rules of equal length keep insertion order.
class LemmaRules {
 public:
  LemmaRules() = default;

  LemmaRules(std::map<std::string, std::string> exceptions, std::vector<SuffixRule> rules)
      : exceptions_(std::move(exceptions)) {
    for (auto& rule : rules) add_suffix_rule(std::move(rule.suffix), std::move(rule.replacement));
  }

  void add_exception(std::string token, std::string lemma) {
    if (token.empty() || lemma.empty()) throw InvalidArgument("lemma exception with empty token or lemma");
    exceptions_.insert_or_assign(std::move(token), std::move(lemma));
  }

  void add_suffix_rule(std::string suffix, std::string replacement) {
    if (suffix.empty()) throw InvalidArgument("suffix rule with empty suffix");
    const std::size_t len = utf8::length(suffix);
    auto pos = std::find_if(rules_.begin(), rules_.end(),
                            [&](const SuffixRule& r) { return utf8::length(r.suffix) < len; });
    rules_.insert(pos, SuffixRule{std::move(suffix), std::move(replacement)});
  }

  const std::map<std::string, std::string>& exceptions() const noexcept { return exceptions_; }
  const std::vector<SuffixRule>& suffix_rules() const noexcept { return rules_; }

  std::size_t max_replacement_length() const {
    std::size_t n = 0;
    for (const auto& r : rules_) n = std::max(n, r.replacement.size());
    return n;
  }

  /// Parses `EXC<TAB>token<TAB>lemma` and `SUF<TAB>suffix<TAB>replacement`
  /// lines; a missing replacement means "delete the suffix". Entries are
  /// normalized with `table` when given.
  static LemmaRules parse(std::istream& in, const std::string& name = {},
                          const NormalizationTable* table = nullptr) {
    LemmaRules rules;
    auto norm = [&](const std::string& s) { return table ? normalize_text(s, *table) : s; };
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string_view line = detail::strip_cr(raw);
      if (detail::is_comment_or_blank(line)) continue;
      auto fields = detail::split_tabs(line);
      if (fields.size() == 2 && fields[0] == "SUF") fields.emplace_back();
      if (fields.size() != 3) throw ParseError(name, line_no, "expected three tab-separated fields");
      try {
        if (fields[0] == "EXC") {
          rules.add_exception(norm(fields[1]), norm(fields[2]));
        } else if (fields[0] == "SUF") {
          rules.add_suffix_rule(norm(fields[1]), norm(fields[2]));
        } else {
          throw ParseError(name, line_no, "unknown rule kind '" + fields[0] + "'");
        }
      } catch (const InvalidArgument& e) {
        throw ParseError(name, line_no, e.what());
      }
    }
    return rules;
  }

  static LemmaRules load(const std::filesystem::path& path, const NormalizationTable* table = nullptr) {
    auto in = detail::open_input(path);
    return parse(in, path.string(), table);
  }

 private:
  std::map<std::string, std::string> exceptions_;
  std::vector<SuffixRule> rules_;
};

/// Exception lookup, else the longest matching suffix rule applied once.
/// A rule that would leave an empty lemma is skipped.
inline std::string lemmatize(std::string_view token, const LemmaRules& rules) {
  if (auto it = rules.exceptions().find(std::string(token)); it != rules.exceptions().end()) return it->second;
  for (const auto& rule : rules.suffix_rules()) {
    if (!token.ends_with(rule.suffix)) continue;
    std::string lemma(token.substr(0, token.size() - rule.suffix.size()));
    lemma += rule.replacement;
    if (!lemma.empty()) return lemma;
  }
  return std::string(token);
}

// ---------------------------------------------------------------------------
// Stopwords

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::set<std::string> words) : words_(std::move(words)) {}

  bool contains(std::string_view token) const { return words_.contains(std::string(token)); }
  const std::set<std::string>& words() const noexcept { return words_; }
  std::size_t size() const noexcept { return words_.size(); }

  /// One token per line, `#` comments allowed; entries normalized with `table`.
  static StopwordSet parse(std::istream& in, const NormalizationTable& table) {
    std::set<std::string> words;
    std::string raw;
    while (std::getline(in, raw)) {
      const std::string_view line = detail::strip_cr(raw);
      if (detail::is_comment_or_blank(line)) continue;
      std::string word = normalize_text(line, table);
      if (!word.empty()) words.insert(std::move(word));
    }
    return StopwordSet(std::move(words));
  }

  static StopwordSet load(const std::filesystem::path& path, const NormalizationTable& table) {
    auto in = detail::open_input(path);
    return parse(in, table);
  }

 private:
  std::set<std::string> words_;
};

inline std::vector<std::string> remove_stopwords(std::vector<std::string> tokens, const StopwordSet& stops) {
  std::erase_if(tokens, [&](const std::string& t) { return stops.contains(t); });
  return tokens;
}

// ---------------------------------------------------------------------------
// Sentence ranking

struct Sentence {
  std::vector<std::string> tokens;
  double score = 0.0;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

/// Scores each sentence by the mean document-wide frequency of its tokens and
/// sorts by descending score; ties keep their original order.
inline std::vector<Sentence> rank_sentences(std::vector<Sentence> sentences) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) ++freq[t];
  for (auto& s : sentences) {
    double sum = 0.0;
    for (const auto& t : s.tokens) sum += static_cast<double>(freq[t]);
    s.score = s.tokens.empty() ? 0.0 : sum / static_cast<double>(s.tokens.size());
  }
  std::stable_sort(sentences.begin(), sentences.end(),
                   [](const Sentence& a, const Sentence& b) { return a.score > b.score; });
  return sentences;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  std::size_t max_source_tokens = 400;
  bool hyphen_is_delimiter = false;
  bool filter_summary_stopwords = true;
};

/// The loaded tables plus pipeline settings.
struct Pipeline {
  NormalizationTable table;
  LemmaRules lemmas;
  StopwordSet stopwords;
  PipelineConfig config;

  static Pipeline load(const std::filesystem::path& normalization, const std::filesystem::path& lemma_rules,
                       const std::filesystem::path& stopword_list, PipelineConfig config = {}) {
    Pipeline p;
    p.table = NormalizationTable::load(normalization);
    p.lemmas = LemmaRules::load(lemma_rules, &p.table);
    p.stopwords = StopwordSet::load(stopword_list, p.table);
    p.config = config;
    return p;
  }

  /// Tokenized, lemmatized and (optionally) stopword-filtered sentences in
  /// document order; sentences left empty are dropped.
  std::vector<Sentence> sentences(std::string_view text, bool filter_stopwords = true) const {
    std::vector<Sentence> out;
    for (const auto& sent : sentence_tokenize(normalize_text(text, table), config.hyphen_is_delimiter)) {
      std::vector<std::string> tokens = word_tokenize(sent);
      for (auto& t : tokens) t = lemmatize(t, lemmas);
      if (filter_stopwords) tokens = remove_stopwords(std::move(tokens), stopwords);
      if (!tokens.empty()) out.push_back(Sentence{std::move(tokens), 0.0});
    }
    return out;
  }

  /// Ranked and truncated source tokens. Throws EmptyAfterPreprocessing.
  std::vector<std::string> source_tokens(std::string_view text) const {
    std::vector<std::string> tokens;
    for (auto& s : rank_sentences(sentences(text))) {
      for (auto& t : s.tokens) {
        if (tokens.size() == config.max_source_tokens) break;
        tokens.push_back(std::move(t));
      }
    }
    if (tokens.empty()) throw EmptyAfterPreprocessing();
    return tokens;
  }

  std::vector<std::string> summary_tokens(std::string_view text) const {
    std::vector<std::string> tokens;
    for (auto& s : sentences(text, config.filter_summary_stopwords))
      for (auto& t : s.tokens) tokens.push_back(std::move(t));
    return tokens;
  }
};

inline TokenizedPair preprocess_pipeline(const RawDocument& doc, const Pipeline& pipeline) {
  return TokenizedPair{doc.id, pipeline.source_tokens(doc.text), pipeline.summary_tokens(doc.summary)};
}

}  // namespace urdusum
