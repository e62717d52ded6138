#include "gencnn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gencnn/training.hpp"

namespace gencnn {

std::string PerplexityReport::report_line() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "mode=" << (dynamic ? "dynamic" : "static") << " tokens=" << token_count
     << " ppl=" << perplexity;
  return os.str();
}

PerplexityReport perplexity(const ParameterSet& ps, const SentenceBatch& corpus,
                            const Vocabulary& vocab, const EvalOptions& opts) {
  if (corpus.sequences.empty()) {
    throw std::invalid_argument("perplexity: empty corpus");
  }
  PerplexityReport report;
  report.dynamic = opts.dynamic;
  report.token_count = corpus.token_count();

  if (!opts.dynamic) {
    // Per-sentence NLLs are accumulated in sorted order so that the total is
    // exactly invariant under test-sentence permutation.
    std::vector<double> nlls;
    nlls.reserve(corpus.sequences.size());
    for (const auto& sentence : corpus.sequences) {
      nlls.push_back(-log_prob_sentence(ps, sentence, opts.softmax, vocab));
    }
    std::sort(nlls.begin(), nlls.end());
    for (double v : nlls) report.total_nll += v;
  } else {
    ParameterSet adapted = ps.clone();
    Tape tape;
    GradientMap grads;
    for (const auto& sentence : corpus.sequences) {
      tape.reset();
      grads.clear();
      std::vector<int> prefix;
      prefix.reserve(sentence.size());
      Var total;
      for (int token : sentence) {
        Var nll = instance_nll(tape, adapted, prefix, token, opts.softmax, vocab);
        total = total.valid() ? tape.add(total, nll) : nll;
        prefix.push_back(token);
      }
      report.total_nll += tape.value(total)[0];
      tape.backward(total, grads, 1.0 / static_cast<double>(sentence.size()));
      adagrad_step(adapted, grads, opts.dynamic_lr, opts.dynamic_eps);
    }
  }
  report.perplexity = std::exp(report.total_nll / static_cast<double>(report.token_count));
  return report;
}

std::string ProbeReport::csv() const {
  std::ostringstream os;
  os << "k,mean_abs_dlogp,n\n";
  os.precision(10);
  for (size_t i = 0; i < distances.size(); ++i) {
    os << distances[i] << "," << mean_abs_dlogp[i] << "," << samples[i] << "\n";
  }
  return os.str();
}

ProbeReport long_range_probe(const ParameterSet& ps, const SentenceBatch& corpus,
                             const Vocabulary& vocab, int k_max, int trials, Rng& rng) {
  if (k_max < 1) throw std::invalid_argument("probe: k_max must be at least 1");
  if (trials < 1) throw std::invalid_argument("probe: trials must be at least 1");

  // usable sentences per distance: need a position t (1-based) with t-k >= 1
  int64_t longest = 0;
  for (const auto& s : corpus.sequences) longest = std::max<int64_t>(longest, static_cast<int64_t>(s.size()));
  if (longest <= k_max) {
    throw std::invalid_argument("probe: k_max " + std::to_string(k_max) +
                                " needs a sentence longer than it; longest has " +
                                std::to_string(longest) + " tokens");
  }

  ProbeReport report;
  for (int k = 1; k <= k_max; ++k) {
    std::vector<size_t> usable;
    for (size_t i = 0; i < corpus.sequences.size(); ++i) {
      if (static_cast<int>(corpus.sequences[i].size()) > k) usable.push_back(i);
    }
    double sum = 0.0;
    int64_t n = 0;
    for (int trial = 0; trial < trials; ++trial) {
      const auto& sentence = corpus.sequences[usable[rng.below(usable.size())]];
      int len = static_cast<int>(sentence.size());
      // 1-based position t in [k+1, len]
      int t = k + 1 + static_cast<int>(rng.below(static_cast<uint64_t>(len - k)));
      int target = sentence[static_cast<size_t>(t - 1)];
      std::vector<int> prefix(sentence.begin(), sentence.begin() + (t - 1));
      int original = prefix[static_cast<size_t>(t - 1 - k)];
      // uniformly random *different* in-vocabulary word
      int replacement = static_cast<int>(rng.below(static_cast<uint64_t>(vocab.size() - 1)));
      if (replacement >= original) ++replacement;
      double before = log_prob_word(ps, forward_repr(ps, prefix), target, SoftmaxMode::full, vocab);
      prefix[static_cast<size_t>(t - 1 - k)] = replacement;
      double after = log_prob_word(ps, forward_repr(ps, prefix), target, SoftmaxMode::full, vocab);
      sum += std::abs(after - before);
      ++n;
    }
    report.distances.push_back(k);
    report.mean_abs_dlogp.push_back(sum / static_cast<double>(n));
    report.samples.push_back(n);
  }
  return report;
}

}  // namespace gencnn
