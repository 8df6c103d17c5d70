#pragma once

#include <string>
#include <vector>

namespace urdusum {

/// An article paired with its human-written reference summary.
struct RawDocument {
  std::string id;
  std::string text;
  std::string summary;

  friend bool operator==(const RawDocument&, const RawDocument&) = default;
};

/// A document after preprocessing: ranked source tokens and summary tokens.
struct TokenizedPair {
  std::string id;
  std::vector<std::string> source;
  std::vector<std::string> summary;

  friend bool operator==(const TokenizedPair&, const TokenizedPair&) = default;
};

}  // namespace urdusum
