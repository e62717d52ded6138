#include "gencnn/rerank.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gencnn/errors.hpp"

namespace gencnn {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::pair<std::string, std::vector<double>>> parse_features(const std::string& field,
                                                                        int64_t lineno) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (const std::string& tok : split_tokens(field)) {
    if (!tok.empty() && tok.back() == '=') {
      out.emplace_back(tok.substr(0, tok.size() - 1), std::vector<double>{});
    } else {
      if (out.empty()) out.emplace_back("", std::vector<double>{});
      try {
        out.back().second.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw IoError("n-best line " + std::to_string(lineno) + ": bad feature value '" + tok + "'");
      }
    }
  }
  return out;
}

}  // namespace

std::vector<NBestList> parse_nbest(std::istream& is) {
  std::vector<NBestList> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    std::vector<std::string> fields;
    size_t pos = 0;
    while (fields.size() < 3) {
      size_t sep = line.find("|||", pos);
      if (sep == std::string::npos) break;
      fields.push_back(line.substr(pos, sep - pos));
      pos = sep + 3;
    }
    fields.push_back(line.substr(pos));
    if (fields.size() != 4) {
      throw IoError("n-best line " + std::to_string(lineno) +
                    ": expected `id ||| tokens ||| features ||| total`");
    }

    Hypothesis hyp;
    std::string id = trim(fields[0]);
    if (id.empty()) throw IoError("n-best line " + std::to_string(lineno) + ": empty segment id");
    hyp.tokens = split_tokens(fields[1]);
    hyp.feature_field = trim(fields[2]);
    hyp.feature_scores = parse_features(hyp.feature_field, lineno);
    hyp.total_field = trim(fields[3]);
    try {
      hyp.total_score = std::stod(hyp.total_field);
    } catch (const std::exception&) {
      throw IoError("n-best line " + std::to_string(lineno) + ": bad total score '" +
                    hyp.total_field + "'");
    }

    if (out.empty() || out.back().segment_id != id) {
      out.push_back({id, {}});
    }
    out.back().hypotheses.push_back(std::move(hyp));
  }
  return out;
}

std::vector<NBestList> parse_nbest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open n-best file: " + path);
  return parse_nbest(in);
}

void RerankConfig::validate() const {
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda must lie in [0, 1]");
}

RescoredList rescore(const ParameterSet& ps, const Vocabulary& vocab, const NBestList& list,
                     const RerankConfig& cfg) {
  cfg.validate();
  if (list.hypotheses.empty()) throw std::invalid_argument("rescore: empty n-best list");

  RescoredList out;
  out.segment_id = list.segment_id;
  for (size_t i = 0; i < list.hypotheses.size(); ++i) {
    const Hypothesis& hyp = list.hypotheses[i];
    std::vector<int> ids;
    for (const std::string& tok : hyp.tokens) ids.push_back(vocab.id(tok));
    ids.push_back(vocab.eos_id());
    double lm = log_prob_sentence(ps, ids, SoftmaxMode::full, vocab);
    double lm_term = cfg.length_norm ? lm / static_cast<double>(ids.size()) : lm;
    RescoredHypothesis r;
    r.input_rank = i;
    r.lm_logprob = lm;
    r.combined = cfg.lambda * lm_term + (1.0 - cfg.lambda) * hyp.total_score;
    r.hypothesis = hyp;
    out.ranked.push_back(std::move(r));
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const RescoredHypothesis& a, const RescoredHypothesis& b) {
                     return a.combined > b.combined;
                   });
  return out;
}

void write_nbest(std::ostream& os, const RescoredList& list) {
  for (const RescoredHypothesis& r : list.ranked) {
    os << list.segment_id << " ||| ";
    for (size_t i = 0; i < r.hypothesis.tokens.size(); ++i) {
      if (i) os << ' ';
      os << r.hypothesis.tokens[i];
    }
    os << " ||| " << r.hypothesis.feature_field;
    if (!r.hypothesis.feature_field.empty()) os << ' ';
    std::ostringstream lm;
    lm << std::setprecision(6) << std::fixed << r.lm_logprob;
    os << "genCNN= " << lm.str() << " ||| " << r.hypothesis.total_field << "\n";
  }
}

}  // namespace gencnn
