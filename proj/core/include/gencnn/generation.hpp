#pragma once

#include <string>
#include <vector>

#include "gencnn/model.hpp"
#include "gencnn/rng.hpp"

namespace gencnn {

struct GenConfig {
  int max_length = 100;        // cap on returned tokens, prefix included
  double temperature = 1.0;
  bool greedy = false;         // argmax instead of sampling (temperature -> 0 limit)
  std::vector<int> prefix;     // id sequence the sentence must start with

  void validate() const;
};

struct GenResult {
  std::vector<std::string> tokens;
  bool truncated = false;  // hit max_length before eos
};

/// Recurrently samples from the full softmax (temperature-scaled logits),
/// feeding each new word back into the history, until eos or max_length.
GenResult sample_sentence(const ParameterSet& ps, const Vocabulary& vocab, const GenConfig& cfg,
                          Rng& rng);

struct QuoteReport {
  bool balanced = true;
  std::vector<size_t> open_positions;  // unmatched `` openers (or the offending '' position)
};

/// `` opens, '' closes; balanced iff every closer matches a prior opener and
/// none remain open. Nesting is not required.
QuoteReport validate_quotes(const std::vector<std::string>& tokens);

struct DepTagReport {
  bool well_formed = true;
  std::vector<std::string> violations;
};

/// Checks a linearized dependency tree: parentheses balance, every group has
/// exactly one head marked by a preceding star, the star is immediately
/// followed by a word or a group, and no star appears outside all groups.
DepTagReport validate_deptags(const std::vector<std::string>& tokens);

inline constexpr const char* kOpenQuote = "``";
inline constexpr const char* kCloseQuote = "''";
inline constexpr const char* kHeadMark = "★";
inline constexpr const char* kOpenParen = "(";
inline constexpr const char* kCloseParen = ")";

}  // namespace gencnn
