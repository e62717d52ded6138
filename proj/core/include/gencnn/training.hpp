#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gencnn/model.hpp"
#include "gencnn/rng.hpp"

namespace gencnn {

struct TrainConfig {
  int batch_size = 500;
  double base_lr = 0.05;
  double adagrad_eps = 1e-8;
  int epochs = 1;
  uint64_t shuffle_seed = 1;
  double init_range = 0.1;
  SoftmaxMode softmax_mode = SoftmaxMode::full;
  std::string embedding_file;  // empty: uniform init

  void validate() const;
};

struct TrainInstance {
  std::vector<int> history;  // strict prefix of the sentence
  int target = -1;
};

/// A sentence of length T yields T instances, including the eos prediction.
std::vector<TrainInstance> split_instances(const SentenceBatch& batch);

/// Non-embedding parameters ~ Uniform(-init_range, init_range); embeddings
/// likewise unless an embedding file provides rows. Accumulators start at zero.
ParameterSet init_params(const ModelConfig& config, const TrainConfig& train,
                         const Vocabulary& vocab, uint64_t rng_seed);

/// Overwrite embedding rows from `word v1 ... vd` lines; unlisted words keep
/// their current rows. Throws IoError on dimension mismatch.
void load_embedding_file(const std::string& path, const Vocabulary& vocab, Tensor& embeddings);

/// Per coordinate: G += g^2; theta -= lr * g / (sqrt(G) + eps).
void adagrad_step(ParameterSet& ps, const GradientMap& grads, double lr, double eps);

struct EpochStats {
  double mean_nll = 0.0;
  int64_t instances = 0;
  double seconds = 0.0;
  double perplexity() const;
};

/// One pass over the instances in shuffled order: per batch, the gradient of
/// the mean instance NLL drives one AdaGrad step.
EpochStats train_epoch(ParameterSet& ps, const std::vector<TrainInstance>& instances,
                       const TrainConfig& train, const Vocabulary& vocab, Rng& shuffle_rng);

}  // namespace gencnn
