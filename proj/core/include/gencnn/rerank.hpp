#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gencnn/model.hpp"

namespace gencnn {

struct Hypothesis {
  std::vector<std::string> tokens;
  /// Parsed `name= v v ...` groups from the feature field, in order.
  std::vector<std::pair<std::string, std::vector<double>>> feature_scores;
  std::string feature_field;  // verbatim, for lossless output
  std::string total_field;    // verbatim
  double total_score = 0.0;
};

struct NBestList {
  std::string segment_id;
  std::vector<Hypothesis> hypotheses;
};

/// Parses `id ||| tokens ||| features ||| total` lines, grouping consecutive
/// lines that share an id. Throws IoError naming the line on malformed input.
std::vector<NBestList> parse_nbest(std::istream& is);
std::vector<NBestList> parse_nbest_file(const std::string& path);

struct RerankConfig {
  double lambda = 0.0;      // weight of the language model score
  bool length_norm = false; // divide the LM log-prob by scored token count

  void validate() const;
};

struct RescoredHypothesis {
  size_t input_rank = 0;    // position in the incoming list
  double lm_logprob = 0.0;
  double combined = 0.0;    // lambda*lm (+norm) + (1-lambda)*total
  Hypothesis hypothesis;
};

struct RescoredList {
  std::string segment_id;
  std::vector<RescoredHypothesis> ranked;  // stable descending by combined
};

RescoredList rescore(const ParameterSet& ps, const Vocabulary& vocab, const NBestList& list,
                     const RerankConfig& cfg);

/// Moses lines in the new order; `genCNN=<logprob>` is appended to the
/// feature field, the total field keeps the original system score.
void write_nbest(std::ostream& os, const RescoredList& list);

}  // namespace gencnn
