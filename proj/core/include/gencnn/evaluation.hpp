#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gencnn/model.hpp"
#include "gencnn/rng.hpp"

namespace gencnn {

struct PerplexityReport {
  int64_t token_count = 0;  // eos per sentence included
  double total_nll = 0.0;
  double perplexity = 1.0;  // exp(total_nll / token_count)
  bool dynamic = false;

  std::string report_line() const;  // mode=<m> tokens=<n> ppl=<p>
};

struct EvalOptions {
  SoftmaxMode softmax = SoftmaxMode::full;
  bool dynamic = false;       // adapt parameters after scoring each sentence
  double dynamic_lr = 0.05;
  double dynamic_eps = 1e-8;
};

/// Static mode scores with frozen parameters. Dynamic mode scores each
/// sentence with the current parameters and then applies one AdaGrad step on
/// that sentence's mean NLL before moving on; the caller's parameters are
/// never modified (a clone adapts).
PerplexityReport perplexity(const ParameterSet& ps, const SentenceBatch& corpus,
                            const Vocabulary& vocab, const EvalOptions& opts = {});

struct ProbeReport {
  std::vector<int> distances;           // k = 1..K
  std::vector<double> mean_abs_dlogp;   // mean |delta log p(target)| per k
  std::vector<int64_t> samples;

  std::string csv() const;  // header k,mean_abs_dlogp,n
};

/// For each distance k, `trials` times: pick a sentence position t with
/// t-k >= 1, replace the token k places before t with a uniformly random
/// different word, and record |log p(token_t | prefix) - same after the
/// replacement|.
ProbeReport long_range_probe(const ParameterSet& ps, const SentenceBatch& corpus,
                             const Vocabulary& vocab, int k_max, int trials, Rng& rng);

}  // namespace gencnn
