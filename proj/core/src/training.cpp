#include "gencnn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gencnn/errors.hpp"

namespace gencnn {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (base_lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (adagrad_eps <= 0.0) throw std::invalid_argument("adagrad_eps must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (init_range < 0.0) throw std::invalid_argument("init_range must be non-negative");
}

std::vector<TrainInstance> split_instances(const SentenceBatch& batch) {
  std::vector<TrainInstance> out;
  for (const auto& sentence : batch.sequences) {
    for (size_t t = 0; t < sentence.size(); ++t) {
      TrainInstance inst;
      inst.history.assign(sentence.begin(), sentence.begin() + static_cast<long>(t));
      inst.target = sentence[t];
      out.push_back(std::move(inst));
    }
  }
  return out;
}

void load_embedding_file(const std::string& path, const Vocabulary& vocab, Tensor& embeddings) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  int d = embeddings.cols();
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::string> parts = split_tokens(line);
    if (parts.empty()) continue;
    if (static_cast<int>(parts.size()) != d + 1) {
      throw IoError("embedding file line " + std::to_string(lineno) + " has " +
                    std::to_string(parts.size() - 1) + " values, expected " + std::to_string(d));
    }
    if (!vocab.contains(parts[0])) continue;
    int id = vocab.id(parts[0]);
    for (int j = 0; j < d; ++j) {
      try {
        embeddings[static_cast<int64_t>(id) * d + j] = std::stod(parts[static_cast<size_t>(j + 1)]);
      } catch (const std::exception&) {
        throw IoError("embedding file line " + std::to_string(lineno) + ": bad number");
      }
    }
  }
}

ParameterSet init_params(const ModelConfig& config, const TrainConfig& train,
                         const Vocabulary& vocab, uint64_t rng_seed) {
  train.validate();
  ParameterSet ps = ParameterSet::create(config, vocab.size());
  Rng rng(rng_seed);
  for (Param* p : ps.params()) {
    for (int64_t i = 0; i < p->value.size(); ++i) {
      p->value[i] = rng.uniform(-train.init_range, train.init_range);
    }
  }
  if (!train.embedding_file.empty()) {
    load_embedding_file(train.embedding_file, vocab, ps.embeddings.value);
  }
  return ps;
}

void adagrad_step(ParameterSet& ps, const GradientMap& grads, double lr, double eps) {
  for (Param* p : ps.params()) {
    if (!grads.has(p->leaf_id)) continue;
    const Tensor& g = grads.at(p->leaf_id);
    if (!g.same_shape(p->value)) {
      throw std::logic_error("gradient shape " + g.shape_str() + " does not match " + p->name);
    }
    if (!g.all_finite()) {
      throw std::runtime_error("non-finite gradient in tensor " + p->name);
    }
    for (int64_t i = 0; i < g.size(); ++i) {
      double gi = g[i];
      if (gi == 0.0) continue;
      p->accum[i] += gi * gi;
      p->value[i] -= lr * gi / (std::sqrt(p->accum[i]) + eps);
    }
  }
}

double EpochStats::perplexity() const { return std::exp(mean_nll); }

EpochStats train_epoch(ParameterSet& ps, const std::vector<TrainInstance>& instances,
                       const TrainConfig& train, const Vocabulary& vocab, Rng& shuffle_rng) {
  train.validate();
  auto start = std::chrono::steady_clock::now();

  std::vector<size_t> order(instances.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_rng.shuffle(order);

  Tape tape;
  GradientMap grads;
  double nll_sum = 0.0;
  size_t pos = 0;
  while (pos < order.size()) {
    size_t batch_end = std::min(order.size(), pos + static_cast<size_t>(train.batch_size));
    int b = static_cast<int>(batch_end - pos);
    grads.clear();
    for (size_t i = pos; i < batch_end; ++i) {
      const TrainInstance& inst = instances[order[i]];
      tape.reset();
      Var nll = instance_nll(tape, ps, inst.history, inst.target, train.softmax_mode, vocab);
      nll_sum += tape.value(nll)[0];
      tape.backward(nll, grads, 1.0 / b);
    }
    adagrad_step(ps, grads, train.base_lr, train.adagrad_eps);
    pos = batch_end;
  }

  EpochStats stats;
  stats.instances = static_cast<int64_t>(instances.size());
  stats.mean_nll = instances.empty() ? 0.0 : nll_sum / static_cast<double>(instances.size());
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

}  // namespace gencnn
