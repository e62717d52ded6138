#include "gencnn/generation.hpp"

#include <cmath>
#include <stdexcept>

namespace gencnn {

void GenConfig::validate() const {
  if (max_length < 1) throw std::invalid_argument("max_length must be at least 1");
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
}

namespace {

int pick(const Tensor& scores, double temperature, bool greedy, Rng& rng) {
  int n = static_cast<int>(scores.size());
  if (greedy) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
      if (scores[i] > scores[best]) best = i;
    }
    return best;
  }
  double mx = scores[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, scores[i]);
  std::vector<double> p(static_cast<size_t>(n));
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    p[static_cast<size_t>(i)] = std::exp((scores[i] - mx) / temperature);
    z += p[static_cast<size_t>(i)];
  }
  double r = rng.uniform() * z;
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += p[static_cast<size_t>(i)];
    if (r < cum) return i;
  }
  return n - 1;
}

Tensor word_scores(const ParameterSet& ps, const std::vector<int>& history) {
  Tensor phi = forward_repr(ps, history);
  Tape tape(false);
  Var s = tape.affine(ps.word_w.use(tape), tape.input(phi), ps.word_b.use(tape));
  return tape.value(s);
}

}  // namespace

GenResult sample_sentence(const ParameterSet& ps, const Vocabulary& vocab, const GenConfig& cfg,
                          Rng& rng) {
  cfg.validate();
  GenResult out;
  std::vector<int> history;
  for (int id : cfg.prefix) {
    if (static_cast<int>(out.tokens.size()) >= cfg.max_length) break;
    history.push_back(id);
    out.tokens.push_back(vocab.word(id));
  }
  while (static_cast<int>(out.tokens.size()) < cfg.max_length) {
    Tensor scores = word_scores(ps, history);
    int next = pick(scores, cfg.temperature, cfg.greedy, rng);
    if (next == vocab.eos_id()) return out;
    history.push_back(next);
    out.tokens.push_back(vocab.word(next));
  }
  out.truncated = true;
  return out;
}

QuoteReport validate_quotes(const std::vector<std::string>& tokens) {
  QuoteReport report;
  std::vector<size_t> open;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == kOpenQuote) {
      open.push_back(i);
    } else if (tokens[i] == kCloseQuote) {
      if (open.empty()) {
        report.balanced = false;
        report.open_positions.push_back(i);  // closer with no matching opener
      } else {
        open.pop_back();
      }
    }
  }
  if (!open.empty()) {
    report.balanced = false;
    for (size_t p : open) report.open_positions.push_back(p);
  }
  return report;
}

DepTagReport validate_deptags(const std::vector<std::string>& tokens) {
  DepTagReport report;
  auto flag = [&report](size_t pos, const std::string& what) {
    report.well_formed = false;
    report.violations.push_back("token " + std::to_string(pos) + ": " + what);
  };

  struct Group {
    size_t open_pos;
    int heads = 0;
  };
  std::vector<Group> stack;
  bool pending_star = false;
  size_t star_pos = 0;

  for (size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    if (tok == kOpenParen) {
      if (pending_star) {
        // the group about to open is the starred constituent of its parent
        stack.back().heads += 1;
        pending_star = false;
      }
      stack.push_back({i, 0});
    } else if (tok == kCloseParen) {
      if (pending_star) {
        flag(star_pos, "head marker not followed by a word or group");
        pending_star = false;
      }
      if (stack.empty()) {
        flag(i, "closing parenthesis without a matching opener");
        continue;
      }
      if (stack.back().heads != 1) {
        flag(stack.back().open_pos,
             "group has " + std::to_string(stack.back().heads) + " head markers, expected 1");
      }
      stack.pop_back();
    } else if (tok == kHeadMark) {
      if (pending_star) {
        flag(star_pos, "head marker not followed by a word or group");
      }
      if (stack.empty()) {
        flag(i, "head marker outside any group");
        pending_star = false;
      } else {
        pending_star = true;
        star_pos = i;
      }
    } else {
      if (pending_star) {
        stack.back().heads += 1;
        pending_star = false;
      }
    }
  }
  if (pending_star) flag(star_pos, "head marker not followed by a word or group");
  for (const Group& g : stack) flag(g.open_pos, "unclosed group");
  return report;
}

}  // namespace gencnn
