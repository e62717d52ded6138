#pragma once

#include <string>
#include <vector>

#include "gencnn/corpus.hpp"
#include "gencnn/layers.hpp"

namespace gencnn {

enum class Ablation { full, time_flow_only, time_arrow_only, alpha_only };

const char* to_string(Ablation a);
const char* to_string(GateMode m);
Ablation ablation_from_string(const std::string& s);
GateMode gate_mode_from_string(const std::string& s);

struct ModelConfig {
  int l_alpha = 30;  // front-end word capacity
  int l_beta = 20;   // summarizer word capacity
  int embed_dim = 100;
  int window = 3;
  std::vector<int> tf_maps = {150, 100};  // shared maps per convolution layer
  std::vector<int> ta_maps = {150, 100};  // location-dependent maps per layer
  int fc_dim = 400;
  int cluster_count = 200;
  Ablation ablation = Ablation::full;
  GateMode gate_mode = GateMode::soft;

  int conv_layers() const { return static_cast<int>(tf_maps.size()); }
  /// Effective map counts after the ablation switch for the front-end stack.
  int alpha_tf(int layer) const;
  int alpha_ta(int layer) const;
  /// Summarizer layers carry only shared maps, all at the first-layer width.
  int beta_maps() const;
  bool uses_beta() const { return ablation != Ablation::alpha_only; }

  /// Throws std::invalid_argument when any field is out of contract.
  void validate() const;
};

/// What one CNN input slot holds.
struct Slot {
  enum Kind { pad, word, summary } kind = pad;
  int word_id = -1;

  static Slot padded() { return {}; }
  static Slot of_word(int id) { return {word, id}; }
  static Slot summarized() { return {summary, -1}; }
  bool operator==(const Slot& o) const { return kind == o.kind && word_id == o.word_id; }
};

/// Slot assignment for one prediction point: the most recent words fill the
/// rightmost front-end slots; older history is folded into summarizer chunks,
/// oldest first, each chunk's leftmost slot reserved for the summary of the
/// chunk before it (a zero pad switches the chain off at the oldest chunk).
struct HistoryLayout {
  std::vector<Slot> alpha_slots;                // exactly l_alpha entries
  std::vector<std::vector<Slot>> beta_chunks;   // oldest first, l_beta entries each
};

HistoryLayout layout_history(const std::vector<int>& history, const ModelConfig& config);

/// Per-layer lengths of one convolution+gating stack.
struct StackGeometry {
  std::vector<int> input_len;  // rows entering conv layer i
  std::vector<int> conv_len;   // locations produced by conv layer i
  std::vector<int> gate_out;   // rows after gate layer i
  int flat_dim = 0;            // gate_out.back() * maps of the last layer
};

StackGeometry stack_geometry(int l_input, int window, const std::vector<int>& maps_total);

/// All learnable tensors of one genCNN instance plus AdaGrad accumulators.
struct ParameterSet {
  ModelConfig config;
  int vocab_size = 0;

  Param embeddings;  // [V x d]
  std::vector<ConvLayerParams> alpha_conv;
  std::vector<GateLayerParams> alpha_gate;
  FCLayerParams alpha_fc;  // -> fc_dim, sigmoid
  std::vector<ConvLayerParams> beta_conv;  // empty when ablation == alpha_only
  std::vector<GateLayerParams> beta_gate;
  FCLayerParams beta_fc;  // -> embed_dim, sigmoid
  Param cluster_w;  // [C x fc_dim]
  Param cluster_b;  // [C]
  Param word_w;     // [V x fc_dim]
  Param word_b;     // [V]

  /// Zero-valued tensors wired to the given config; names and leaf ids fixed.
  static ParameterSet create(const ModelConfig& config, int vocab_size);

  /// Every parameter in enumeration (= leaf id) order.
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  ParameterSet clone() const;
  int64_t parameter_count() const;
};

enum class SoftmaxMode { full, hierarchical };
const char* to_string(SoftmaxMode m);
SoftmaxMode softmax_mode_from_string(const std::string& s);

/// Runs the recursive CNN over a layout; returns the representation phi.
Var model_forward(Tape& tape, const ParameterSet& ps, const HistoryLayout& layout);

/// Convenience: phi for a history without gradient recording.
Tensor forward_repr(const ParameterSet& ps, const std::vector<int>& history);

/// Softmax over all word scores; sums to 1, every entry positive.
Tensor predict_full(const ParameterSet& ps, const Tensor& phi);

/// p(cluster(word) | phi) * p(word | cluster(word), phi).
double predict_hierarchical(const ParameterSet& ps, const Tensor& phi, int word,
                            const Vocabulary& vocab);

double log_prob_word(const ParameterSet& ps, const Tensor& phi, int word, SoftmaxMode mode,
                     const Vocabulary& vocab);

/// Sum over positions t of log p(token_t | prefix), eos included.
double log_prob_sentence(const ParameterSet& ps, const std::vector<int>& sentence,
                         SoftmaxMode mode, const Vocabulary& vocab);

/// Traced -log p(target | history) for one training instance.
Var instance_nll(Tape& tape, const ParameterSet& ps, const std::vector<int>& history, int target,
                 SoftmaxMode mode, const Vocabulary& vocab);

}  // namespace gencnn
