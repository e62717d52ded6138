#include "gencnn/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gencnn {

namespace {

using CMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

Tensor matvec_affine(const Tensor& w, const Tensor& b, const Tensor& x) {
  int m = w.rows(), n = w.cols();
  Tensor out = Tensor::zeros({m});
  VecMap(out.data(), m).noalias() =
      CMatMap(w.data(), m, n) * CVecMap(x.data(), x.size()) + CVecMap(b.data(), m);
  return out;
}

double logsumexp(const double* v, int n) {
  double mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(v[i] - mx);
  return mx + std::log(z);
}

void softmax_inplace(Tensor& t) {
  int n = static_cast<int>(t.size());
  double mx = t[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, t[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    t[i] = std::exp(t[i] - mx);
    z += t[i];
  }
  for (int i = 0; i < n; ++i) t[i] /= z;
}

int member_index(const std::vector<int>& members, int word) {
  auto it = std::lower_bound(members.begin(), members.end(), word);
  if (it == members.end() || *it != word) {
    throw std::logic_error("word " + std::to_string(word) + " missing from its cluster");
  }
  return static_cast<int>(it - members.begin());
}

}  // namespace

// ---------------------------------------------------------------------------
// enum names

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::time_flow_only: return "time_flow_only";
    case Ablation::time_arrow_only: return "time_arrow_only";
    case Ablation::alpha_only: return "alpha_only";
  }
  return "?";
}

const char* to_string(GateMode m) { return m == GateMode::soft ? "soft" : "hard"; }
const char* to_string(SoftmaxMode m) { return m == SoftmaxMode::full ? "full" : "hierarchical"; }

Ablation ablation_from_string(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "time_flow_only") return Ablation::time_flow_only;
  if (s == "time_arrow_only") return Ablation::time_arrow_only;
  if (s == "alpha_only") return Ablation::alpha_only;
  throw std::invalid_argument("unknown ablation: " + s);
}

GateMode gate_mode_from_string(const std::string& s) {
  if (s == "soft") return GateMode::soft;
  if (s == "hard") return GateMode::hard;
  throw std::invalid_argument("unknown gate mode: " + s);
}

SoftmaxMode softmax_mode_from_string(const std::string& s) {
  if (s == "full") return SoftmaxMode::full;
  if (s == "hierarchical") return SoftmaxMode::hierarchical;
  throw std::invalid_argument("unknown softmax mode: " + s);
}

// ---------------------------------------------------------------------------
// configuration

int ModelConfig::alpha_tf(int layer) const {
  return ablation == Ablation::time_arrow_only ? 0 : tf_maps[static_cast<size_t>(layer)];
}

int ModelConfig::alpha_ta(int layer) const {
  return ablation == Ablation::time_flow_only ? 0 : ta_maps[static_cast<size_t>(layer)];
}

int ModelConfig::beta_maps() const { return tf_maps.empty() ? 0 : tf_maps[0]; }

StackGeometry stack_geometry(int l_input, int window, const std::vector<int>& maps_total) {
  StackGeometry g;
  int len = l_input;
  for (size_t i = 0; i < maps_total.size(); ++i) {
    if (len < window) {
      throw std::invalid_argument("convolution layer " + std::to_string(i + 1) + " input length " +
                                  std::to_string(len) + " is shorter than window " +
                                  std::to_string(window));
    }
    g.input_len.push_back(len);
    int conv = len - window + 1;
    g.conv_len.push_back(conv);
    len = (conv + 1) / 2;
    g.gate_out.push_back(len);
  }
  g.flat_dim = len * maps_total.back();
  return g;
}

void ModelConfig::validate() const {
  if (window < 1) throw std::invalid_argument("window must be positive");
  if (l_alpha <= window) {
    throw std::invalid_argument("l_alpha (" + std::to_string(l_alpha) +
                                ") must exceed window (" + std::to_string(window) + ")");
  }
  if (l_beta <= window) {
    throw std::invalid_argument("l_beta (" + std::to_string(l_beta) + ") must exceed window (" +
                                std::to_string(window) + ")");
  }
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be positive");
  if (fc_dim < 1) throw std::invalid_argument("fc_dim must be positive");
  if (cluster_count < 1) throw std::invalid_argument("cluster_count must be positive");
  if (tf_maps.empty() || tf_maps.size() != ta_maps.size()) {
    throw std::invalid_argument("tf_maps and ta_maps must list the same positive layer count");
  }
  std::vector<int> alpha_total;
  for (int i = 0; i < conv_layers(); ++i) {
    if (tf_maps[static_cast<size_t>(i)] < 0 || ta_maps[static_cast<size_t>(i)] < 0) {
      throw std::invalid_argument("feature map counts must be non-negative");
    }
    int total = alpha_tf(i) + alpha_ta(i);
    if (total < 1) {
      throw std::invalid_argument("layer " + std::to_string(i + 1) +
                                  " has no feature maps under ablation " + to_string(ablation));
    }
    alpha_total.push_back(total);
  }
  stack_geometry(l_alpha, window, alpha_total);
  if (uses_beta()) {
    if (beta_maps() < 1) throw std::invalid_argument("summarizer needs at least one feature map");
    stack_geometry(l_beta, window, std::vector<int>(tf_maps.size(), beta_maps()));
  }
}

// ---------------------------------------------------------------------------
// history layout

HistoryLayout layout_history(const std::vector<int>& history, const ModelConfig& config) {
  const int la = config.l_alpha;
  const int lb = config.l_beta;

  int len = static_cast<int>(history.size());
  int start = 0;
  if (config.ablation == Ablation::alpha_only && len > la - 1) {
    start = len - (la - 1);  // truncate words older than the front-end window
    len = la - 1;
  }

  HistoryLayout out;
  out.alpha_slots.assign(static_cast<size_t>(la), Slot::padded());
  if (len <= la - 1) {
    for (int i = 0; i < len; ++i) {
      out.alpha_slots[static_cast<size_t>(la - len + i)] = Slot::of_word(history[static_cast<size_t>(start + i)]);
    }
    return out;
  }

  out.alpha_slots[0] = Slot::summarized();
  for (int i = 0; i < la - 1; ++i) {
    out.alpha_slots[static_cast<size_t>(1 + i)] = Slot::of_word(history[static_cast<size_t>(len - (la - 1) + i)]);
  }

  int rest = len - (la - 1);
  int per_chunk = lb - 1;
  int chunks = (rest + per_chunk - 1) / per_chunk;
  for (int c = 0; c < chunks; ++c) {
    int begin = std::max(0, rest - (chunks - c) * per_chunk);
    int end = rest - (chunks - 1 - c) * per_chunk;
    std::vector<Slot> chunk(static_cast<size_t>(lb), Slot::padded());
    if (c > 0) chunk[0] = Slot::summarized();
    int n = end - begin;
    for (int i = 0; i < n; ++i) {
      chunk[static_cast<size_t>(lb - n + i)] = Slot::of_word(history[static_cast<size_t>(begin + i)]);
    }
    out.beta_chunks.push_back(std::move(chunk));
  }
  return out;
}

// ---------------------------------------------------------------------------
// parameter set

namespace {

ConvLayerParams make_conv(const std::string& prefix, int window, int d_in, int tf, int ta,
                          int locations) {
  ConvLayerParams p;
  p.window = window;
  p.d_in = d_in;
  p.tf_maps = tf;
  p.ta_maps = ta;
  p.locations = locations;
  p.activation = Activation::relu;
  int s = window * d_in;
  if (tf > 0) {
    p.w_tf = {prefix + ".w_tf", Tensor::zeros({tf, s}), Tensor::zeros({tf, s}), -1};
    p.b_tf = {prefix + ".b_tf", Tensor::zeros({tf}), Tensor::zeros({tf}), -1};
  }
  if (ta > 0) {
    p.w_ta = {prefix + ".w_ta", Tensor::zeros({locations, ta, s}), Tensor::zeros({locations, ta, s}), -1};
    p.b_ta = {prefix + ".b_ta", Tensor::zeros({locations, ta}), Tensor::zeros({locations, ta}), -1};
  }
  return p;
}

GateLayerParams make_gate(const std::string& prefix, int seg_width, int tf, int ta, int windows,
                          GateMode mode) {
  GateLayerParams p;
  p.seg_width = seg_width;
  p.tf_maps = tf;
  p.ta_maps = ta;
  p.windows = windows;
  p.mode = mode;
  int s = 2 * seg_width;
  if (windows > 0) {
    if (tf > 0) {
      p.w_tf = {prefix + ".w_tf", Tensor::zeros({tf, s}), Tensor::zeros({tf, s}), -1};
      p.b_tf = {prefix + ".b_tf", Tensor::zeros({tf}), Tensor::zeros({tf}), -1};
    }
    if (ta > 0) {
      p.w_ta = {prefix + ".w_ta", Tensor::zeros({windows, ta, s}), Tensor::zeros({windows, ta, s}), -1};
      p.b_ta = {prefix + ".b_ta", Tensor::zeros({windows, ta}), Tensor::zeros({windows, ta}), -1};
    }
  }
  return p;
}

FCLayerParams make_fc(const std::string& prefix, int d_in, int d_out) {
  FCLayerParams p;
  p.d_in = d_in;
  p.d_out = d_out;
  p.activation = Activation::sigmoid;
  p.w = {prefix + ".w", Tensor::zeros({d_out, d_in}), Tensor::zeros({d_out, d_in}), -1};
  p.b = {prefix + ".b", Tensor::zeros({d_out}), Tensor::zeros({d_out}), -1};
  return p;
}

void push_conv(std::vector<Param*>& out, ConvLayerParams& p) {
  if (p.w_tf.defined()) {
    out.push_back(&p.w_tf);
    out.push_back(&p.b_tf);
  }
  if (p.w_ta.defined()) {
    out.push_back(&p.w_ta);
    out.push_back(&p.b_ta);
  }
}

void push_gate(std::vector<Param*>& out, GateLayerParams& p) {
  if (p.w_tf.defined()) {
    out.push_back(&p.w_tf);
    out.push_back(&p.b_tf);
  }
  if (p.w_ta.defined()) {
    out.push_back(&p.w_ta);
    out.push_back(&p.b_ta);
  }
}

}  // namespace

ParameterSet ParameterSet::create(const ModelConfig& config, int vocab_size) {
  config.validate();
  if (vocab_size < 2) throw std::invalid_argument("vocabulary must hold at least unk and eos");

  ParameterSet ps;
  ps.config = config;
  ps.vocab_size = vocab_size;
  int d = config.embed_dim;
  ps.embeddings = {"embeddings", Tensor::zeros({vocab_size, d}), Tensor::zeros({vocab_size, d}), -1};

  std::vector<int> alpha_total;
  for (int i = 0; i < config.conv_layers(); ++i) alpha_total.push_back(config.alpha_tf(i) + config.alpha_ta(i));
  StackGeometry ag = stack_geometry(config.l_alpha, config.window, alpha_total);
  int d_in = d;
  for (int i = 0; i < config.conv_layers(); ++i) {
    std::string cname = "alpha.conv" + std::to_string(i + 1);
    std::string gname = "alpha.gate" + std::to_string(i + 1);
    ps.alpha_conv.push_back(make_conv(cname, config.window, d_in, config.alpha_tf(i),
                                      config.alpha_ta(i), ag.conv_len[static_cast<size_t>(i)]));
    ps.alpha_gate.push_back(make_gate(gname, config.window * d_in, config.alpha_tf(i),
                                      config.alpha_ta(i), ag.conv_len[static_cast<size_t>(i)] / 2,
                                      config.gate_mode));
    d_in = alpha_total[static_cast<size_t>(i)];
  }
  ps.alpha_fc = make_fc("alpha.fc", ag.flat_dim, config.fc_dim);

  if (config.uses_beta()) {
    int bm = config.beta_maps();
    StackGeometry bg = stack_geometry(config.l_beta, config.window,
                                      std::vector<int>(config.tf_maps.size(), bm));
    d_in = d;
    for (int i = 0; i < config.conv_layers(); ++i) {
      std::string cname = "beta.conv" + std::to_string(i + 1);
      std::string gname = "beta.gate" + std::to_string(i + 1);
      ps.beta_conv.push_back(make_conv(cname, config.window, d_in, bm, 0,
                                       bg.conv_len[static_cast<size_t>(i)]));
      ps.beta_gate.push_back(make_gate(gname, config.window * d_in, bm, 0,
                                       bg.conv_len[static_cast<size_t>(i)] / 2, config.gate_mode));
      d_in = bm;
    }
    ps.beta_fc = make_fc("beta.fc", bg.flat_dim, d);
  }

  int C = config.cluster_count;
  ps.cluster_w = {"softmax.cluster.w", Tensor::zeros({C, config.fc_dim}), Tensor::zeros({C, config.fc_dim}), -1};
  ps.cluster_b = {"softmax.cluster.b", Tensor::zeros({C}), Tensor::zeros({C}), -1};
  ps.word_w = {"softmax.word.w", Tensor::zeros({vocab_size, config.fc_dim}),
               Tensor::zeros({vocab_size, config.fc_dim}), -1};
  ps.word_b = {"softmax.word.b", Tensor::zeros({vocab_size}), Tensor::zeros({vocab_size}), -1};

  auto all = ps.params();
  for (size_t i = 0; i < all.size(); ++i) all[i]->leaf_id = static_cast<int>(i);
  return ps;
}

std::vector<Param*> ParameterSet::params() {
  std::vector<Param*> out;
  out.push_back(&embeddings);
  for (size_t i = 0; i < alpha_conv.size(); ++i) {
    push_conv(out, alpha_conv[i]);
    push_gate(out, alpha_gate[i]);
  }
  out.push_back(&alpha_fc.w);
  out.push_back(&alpha_fc.b);
  for (size_t i = 0; i < beta_conv.size(); ++i) {
    push_conv(out, beta_conv[i]);
    push_gate(out, beta_gate[i]);
  }
  if (beta_fc.w.defined()) {
    out.push_back(&beta_fc.w);
    out.push_back(&beta_fc.b);
  }
  out.push_back(&cluster_w);
  out.push_back(&cluster_b);
  out.push_back(&word_w);
  out.push_back(&word_b);
  return out;
}

std::vector<const Param*> ParameterSet::params() const {
  auto v = const_cast<ParameterSet*>(this)->params();
  return std::vector<const Param*>(v.begin(), v.end());
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out = create(config, vocab_size);
  auto src = params();
  auto dst = out.params();
  for (size_t i = 0; i < src.size(); ++i) {
    dst[i]->value = src[i]->value.clone();
    dst[i]->accum = src[i]->accum.clone();
  }
  return out;
}

int64_t ParameterSet::parameter_count() const {
  int64_t n = 0;
  for (const Param* p : params()) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------------------
// forward

namespace {

Var compose_slots(Tape& tape, Var table, const std::vector<Slot>& slots, Var summary) {
  std::vector<RowSource> rows(slots.size());
  bool uses_summary = false;
  for (size_t i = 0; i < slots.size(); ++i) {
    switch (slots[i].kind) {
      case Slot::pad:
        rows[i] = {RowSource::zeros, 0};
        break;
      case Slot::word:
        rows[i] = {RowSource::table_row, slots[i].word_id};
        break;
      case Slot::summary:
        if (!summary.valid()) throw std::logic_error("layout references a missing summary");
        rows[i] = {RowSource::injected, 0};
        uses_summary = true;
        break;
    }
  }
  std::vector<Var> injected;
  if (uses_summary) injected.push_back(summary);
  return tape.compose_rows(table, rows, injected);
}

Var run_stack(Tape& tape, const std::vector<ConvLayerParams>& convs,
              const std::vector<GateLayerParams>& gates, const FCLayerParams& fc, Var x) {
  for (size_t i = 0; i < convs.size(); ++i) {
    ConvOut c = conv_forward(tape, convs[i], x);
    x = gate_forward(tape, gates[i], c.feature_maps, c.segments);
  }
  const Tensor& t = tape.value(x);
  Var flat = tape.reshape(x, {t.rows() * t.cols()});
  return fc_forward(tape, fc, flat);
}

}  // namespace

Var model_forward(Tape& tape, const ParameterSet& ps, const HistoryLayout& layout) {
  if (!layout.beta_chunks.empty() && ps.beta_conv.empty()) {
    throw std::logic_error("layout carries summarizer chunks but the model has no beta stack");
  }
  Var table = ps.embeddings.use(tape);
  Var summary;
  for (const auto& chunk : layout.beta_chunks) {
    Var x = compose_slots(tape, table, chunk, summary);
    summary = run_stack(tape, ps.beta_conv, ps.beta_gate, ps.beta_fc, x);
  }
  Var x = compose_slots(tape, table, layout.alpha_slots, summary);
  return run_stack(tape, ps.alpha_conv, ps.alpha_gate, ps.alpha_fc, x);
}

Tensor forward_repr(const ParameterSet& ps, const std::vector<int>& history) {
  Tape tape(false);
  Var phi = model_forward(tape, ps, layout_history(history, ps.config));
  return tape.value(phi);
}

// ---------------------------------------------------------------------------
// prediction heads

Tensor predict_full(const ParameterSet& ps, const Tensor& phi) {
  Tensor probs = matvec_affine(ps.word_w.value, ps.word_b.value, phi);
  softmax_inplace(probs);
  return probs;
}

double predict_hierarchical(const ParameterSet& ps, const Tensor& phi, int word,
                            const Vocabulary& vocab) {
  if (word < 0 || word >= ps.vocab_size) {
    throw std::invalid_argument("word id " + std::to_string(word) + " outside vocabulary of " +
                                std::to_string(ps.vocab_size));
  }
  if (vocab.cluster_count() != ps.cluster_w.value.rows()) {
    throw std::logic_error("vocabulary cluster count does not match the softmax head");
  }
  Tensor cscores = matvec_affine(ps.cluster_w.value, ps.cluster_b.value, phi);
  softmax_inplace(cscores);
  int c = vocab.cluster_of(word);
  const std::vector<int>& members = vocab.cluster_members(c);
  Tensor mscores = Tensor::zeros({static_cast<int>(members.size())});
  for (size_t i = 0; i < members.size(); ++i) {
    int w = members[i];
    CVecMap row(ps.word_w.value.data() + static_cast<int64_t>(w) * ps.config.fc_dim, ps.config.fc_dim);
    mscores[static_cast<int64_t>(i)] = row.dot(CVecMap(phi.data(), phi.size())) + ps.word_b.value[w];
  }
  softmax_inplace(mscores);
  return cscores[c] * mscores[member_index(members, word)];
}

double log_prob_word(const ParameterSet& ps, const Tensor& phi, int word, SoftmaxMode mode,
                     const Vocabulary& vocab) {
  if (word < 0 || word >= ps.vocab_size) {
    throw std::invalid_argument("word id " + std::to_string(word) + " outside vocabulary of " +
                                std::to_string(ps.vocab_size));
  }
  if (mode == SoftmaxMode::full) {
    Tensor scores = matvec_affine(ps.word_w.value, ps.word_b.value, phi);
    return scores[word] - logsumexp(scores.data(), static_cast<int>(scores.size()));
  }
  Tensor cscores = matvec_affine(ps.cluster_w.value, ps.cluster_b.value, phi);
  int c = vocab.cluster_of(word);
  double log_pc = cscores[c] - logsumexp(cscores.data(), static_cast<int>(cscores.size()));
  const std::vector<int>& members = vocab.cluster_members(c);
  Tensor mscores = Tensor::zeros({static_cast<int>(members.size())});
  for (size_t i = 0; i < members.size(); ++i) {
    int w = members[i];
    CVecMap row(ps.word_w.value.data() + static_cast<int64_t>(w) * ps.config.fc_dim, ps.config.fc_dim);
    mscores[static_cast<int64_t>(i)] = row.dot(CVecMap(phi.data(), phi.size())) + ps.word_b.value[w];
  }
  double log_pw = mscores[member_index(members, word)] -
                  logsumexp(mscores.data(), static_cast<int>(mscores.size()));
  return log_pc + log_pw;
}

double log_prob_sentence(const ParameterSet& ps, const std::vector<int>& sentence,
                         SoftmaxMode mode, const Vocabulary& vocab) {
  if (sentence.empty()) throw std::invalid_argument("log_prob_sentence: empty sentence");
  double total = 0.0;
  std::vector<int> prefix;
  prefix.reserve(sentence.size());
  for (int token : sentence) {
    Tensor phi = forward_repr(ps, prefix);
    total += log_prob_word(ps, phi, token, mode, vocab);
    prefix.push_back(token);
  }
  return total;
}

Var instance_nll(Tape& tape, const ParameterSet& ps, const std::vector<int>& history, int target,
                 SoftmaxMode mode, const Vocabulary& vocab) {
  Var phi = model_forward(tape, ps, layout_history(history, ps.config));
  if (mode == SoftmaxMode::full) {
    Var scores = tape.affine(ps.word_w.use(tape), phi, ps.word_b.use(tape));
    return tape.cross_entropy_logits(scores, target);
  }
  if (vocab.cluster_count() != ps.cluster_w.value.rows()) {
    throw std::logic_error("vocabulary cluster count does not match the softmax head");
  }
  int c = vocab.cluster_of(target);
  Var cscores = tape.affine(ps.cluster_w.use(tape), phi, ps.cluster_b.use(tape));
  Var cluster_nll = tape.cross_entropy_logits(cscores, c);
  const std::vector<int>& members = vocab.cluster_members(c);
  Var mscores = tape.row_gather_affine(ps.word_w.use(tape), ps.word_b.use(tape), members, phi);
  Var member_nll = tape.cross_entropy_logits(mscores, member_index(members, target));
  return tape.add(cluster_nll, member_nll);
}

}  // namespace gencnn
