// Command line front end: train, eval, generate, rerank, probe.
// Exit codes: 0 success, 1 usage error, 2 I/O or format error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gencnn/errors.hpp"
#include "gencnn/evaluation.hpp"
#include "gencnn/generation.hpp"
#include "gencnn/model_io.hpp"
#include "gencnn/rerank.hpp"
#include "gencnn/training.hpp"

using namespace gencnn;

namespace {

std::vector<int> parse_map_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad feature-map list: " + text);
    }
  }
  if (out.empty()) throw std::invalid_argument("feature-map list is empty: " + text);
  return out;
}

struct TrainArgs {
  std::string corpus;
  std::string out;
  std::string vocab_in;
  std::string vocab_out;
  std::string embeddings;
  std::string log_path;
  std::string tf_maps = "150,100";
  std::string ta_maps = "150,100";
  std::string ablation = "full";
  std::string gate_mode = "soft";
  std::string softmax_mode = "full";
  int max_vocab = 10000;
  int clusters = 200;
  int l_alpha = 30;
  int l_beta = 20;
  int embed_dim = 100;
  int window = 3;
  int fc_dim = 400;
  int epochs = 1;
  int batch_size = 500;
  double lr = 0.05;
  double adagrad_eps = 1e-8;
  double init_range = 0.1;
  uint64_t seed = 1;
};

int cmd_train(const TrainArgs& a) {
  Vocabulary vocab = a.vocab_in.empty()
                         ? build_vocabulary_file(a.corpus, a.max_vocab, a.clusters)
                         : Vocabulary::load_file(a.vocab_in);

  ModelConfig cfg;
  cfg.l_alpha = a.l_alpha;
  cfg.l_beta = a.l_beta;
  cfg.embed_dim = a.embed_dim;
  cfg.window = a.window;
  cfg.tf_maps = parse_map_list(a.tf_maps);
  cfg.ta_maps = parse_map_list(a.ta_maps);
  cfg.fc_dim = a.fc_dim;
  cfg.cluster_count = vocab.cluster_count();
  cfg.ablation = ablation_from_string(a.ablation);
  cfg.gate_mode = gate_mode_from_string(a.gate_mode);
  cfg.validate();

  TrainConfig tc;
  tc.batch_size = a.batch_size;
  tc.base_lr = a.lr;
  tc.adagrad_eps = a.adagrad_eps;
  tc.epochs = a.epochs;
  tc.shuffle_seed = a.seed;
  tc.init_range = a.init_range;
  tc.softmax_mode = softmax_mode_from_string(a.softmax_mode);
  tc.embedding_file = a.embeddings;
  tc.validate();

  SentenceBatch corpus = read_corpus_file(a.corpus, vocab);
  std::vector<TrainInstance> instances = split_instances(corpus);
  ParameterSet ps = init_params(cfg, tc, vocab, a.seed);

  std::ofstream log;
  if (!a.log_path.empty()) {
    log.open(a.log_path);
    if (!log) throw IoError("cannot write training log: " + a.log_path);
  }
  Rng shuffle(tc.shuffle_seed);
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    EpochStats st = train_epoch(ps, instances, tc, vocab, shuffle);
    char line[160];
    std::snprintf(line, sizeof(line), "%d\t%.6f\t%.6f\t%.3f", epoch, st.mean_nll,
                  st.perplexity(), st.seconds);
    std::cout << line << std::endl;
    if (log) log << line << "\n";
  }

  save_model(a.out, ps, vocab);
  if (!a.vocab_out.empty()) vocab.save_file(a.vocab_out);
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string corpus;
  std::string vocab;
  std::string softmax_mode = "full";
  bool dynamic = false;
  double lr = 0.05;
  double adagrad_eps = 1e-8;
};

int cmd_eval(const EvalArgs& a) {
  LoadedModel m = load_model(a.model);
  if (!a.vocab.empty()) {
    Vocabulary external = Vocabulary::load_file(a.vocab);
    if (external.content_hash() != m.vocab.content_hash()) {
      throw IoError("vocabulary mismatch: " + a.vocab + " differs from the model's embedded vocabulary");
    }
  }
  SentenceBatch corpus = read_corpus_file(a.corpus, m.vocab);
  EvalOptions opts;
  opts.softmax = softmax_mode_from_string(a.softmax_mode);
  opts.dynamic = a.dynamic;
  opts.dynamic_lr = a.lr;
  opts.dynamic_eps = a.adagrad_eps;
  PerplexityReport report = perplexity(m.params, corpus, m.vocab, opts);
  std::cout << report.report_line() << "\n";
  return 0;
}

struct GenerateArgs {
  std::string model;
  std::string prefix;
  int n = 1;
  int max_length = 100;
  double temperature = 1.0;
  bool greedy = false;
  uint64_t seed = 1;
};

int cmd_generate(const GenerateArgs& a) {
  LoadedModel m = load_model(a.model);
  GenConfig gc;
  gc.max_length = a.max_length;
  gc.temperature = a.temperature;
  gc.greedy = a.greedy;
  for (const std::string& tok : split_tokens(a.prefix)) gc.prefix.push_back(m.vocab.id(tok));
  gc.validate();
  Rng rng(a.seed);
  for (int i = 0; i < a.n; ++i) {
    GenResult r = sample_sentence(m.params, m.vocab, gc, rng);
    for (size_t t = 0; t < r.tokens.size(); ++t) {
      if (t) std::cout << ' ';
      std::cout << r.tokens[t];
    }
    std::cout << "\n";
  }
  return 0;
}

struct RerankArgs {
  std::string model;
  std::string nbest;
  double lambda = 0.0;
  bool length_norm = false;
};

int cmd_rerank(const RerankArgs& a) {
  LoadedModel m = load_model(a.model);
  RerankConfig cfg{a.lambda, a.length_norm};
  cfg.validate();
  std::vector<NBestList> lists = parse_nbest_file(a.nbest);
  for (const NBestList& list : lists) {
    RescoredList r = rescore(m.params, m.vocab, list, cfg);
    write_nbest(std::cout, r);
  }
  return 0;
}

struct ProbeArgs {
  std::string model;
  std::string corpus;
  int k_max = 10;
  int trials = 100;
  uint64_t seed = 1;
  bool alpha_only = false;
};

int cmd_probe(const ProbeArgs& a) {
  LoadedModel m = load_model(a.model);
  if (a.alpha_only) m.params.config.ablation = Ablation::alpha_only;
  SentenceBatch corpus = read_corpus_file(a.corpus, m.vocab);
  Rng rng(a.seed);
  ProbeReport report = long_range_probe(m.params, corpus, m.vocab, a.k_max, a.trials, rng);
  std::cout << report.csv();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"genCNN: convolutional word-sequence prediction"};
  app.require_subcommand(1);

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "Train a model on a tokenized corpus");
  train->add_option("--corpus", ta.corpus, "training corpus, one sentence per line")->required();
  train->add_option("--out", ta.out, "output model file")->required();
  train->add_option("--vocab", ta.vocab_in, "load a vocabulary file instead of building one");
  train->add_option("--save-vocab", ta.vocab_out, "also write the vocabulary file");
  train->add_option("--max-vocab", ta.max_vocab, "vocabulary budget including unk and eos");
  train->add_option("--clusters", ta.clusters, "word clusters for the hierarchical softmax");
  train->add_option("--l-alpha", ta.l_alpha, "front-end word capacity");
  train->add_option("--l-beta", ta.l_beta, "summarizer word capacity");
  train->add_option("--embed-dim", ta.embed_dim, "word embedding width");
  train->add_option("--window", ta.window, "convolution window");
  train->add_option("--tf-maps", ta.tf_maps, "shared feature maps per layer, comma separated");
  train->add_option("--ta-maps", ta.ta_maps, "location-wise feature maps per layer");
  train->add_option("--fc-dim", ta.fc_dim, "fully connected representation width");
  train->add_option("--ablation", ta.ablation, "full|time_flow_only|time_arrow_only|alpha_only");
  train->add_option("--gate-mode", ta.gate_mode, "soft|hard");
  train->add_option("--softmax-mode", ta.softmax_mode, "full|hierarchical training loss");
  train->add_option("--epochs", ta.epochs, "training epochs");
  train->add_option("--batch-size", ta.batch_size, "instances per update");
  train->add_option("--lr", ta.lr, "base learning rate");
  train->add_option("--adagrad-eps", ta.adagrad_eps, "adagrad denominator floor");
  train->add_option("--init-range", ta.init_range, "uniform init half-width");
  train->add_option("--embeddings", ta.embeddings, "pretrained embedding text file");
  train->add_option("--seed", ta.seed, "seed for init and shuffling");
  train->add_option("--log", ta.log_path, "epoch log file");

  EvalArgs ea;
  CLI::App* eval = app.add_subcommand("eval", "Report perplexity on a corpus");
  eval->add_option("--model", ea.model)->required();
  eval->add_option("--corpus", ea.corpus)->required();
  eval->add_option("--vocab", ea.vocab, "cross-check against the embedded vocabulary");
  eval->add_option("--softmax-mode", ea.softmax_mode, "full|hierarchical scoring");
  eval->add_flag("--dynamic", ea.dynamic, "adapt parameters online while scoring");
  eval->add_option("--lr", ea.lr, "dynamic-mode learning rate");
  eval->add_option("--adagrad-eps", ea.adagrad_eps, "dynamic-mode adagrad floor");

  GenerateArgs ga;
  CLI::App* gen = app.add_subcommand("generate", "Sample sentences from a model");
  gen->add_option("--model", ga.model)->required();
  gen->add_option("--n", ga.n, "number of sentences");
  gen->add_option("--prefix", ga.prefix, "tokens the sentence must start with");
  gen->add_option("--max-length", ga.max_length, "token cap per sentence");
  gen->add_option("--temperature", ga.temperature, "softmax temperature");
  gen->add_flag("--greedy", ga.greedy, "argmax decoding");
  gen->add_option("--seed", ga.seed);

  RerankArgs ra;
  CLI::App* rerank = app.add_subcommand("rerank", "Re-rank a Moses n-best list");
  rerank->add_option("--model", ra.model)->required();
  rerank->add_option("--nbest", ra.nbest, "n-best file in Moses format")->required();
  rerank->add_option("--lambda", ra.lambda, "language model interpolation weight in [0,1]");
  rerank->add_flag("--length-norm", ra.length_norm, "normalize the LM score by token count");

  ProbeArgs pa;
  CLI::App* probe = app.add_subcommand("probe", "Long-range dependency perturbation probe");
  probe->add_option("--model", pa.model)->required();
  probe->add_option("--corpus", pa.corpus)->required();
  probe->add_option("--k-max", pa.k_max, "largest perturbation distance");
  probe->add_option("--trials", pa.trials, "samples per distance");
  probe->add_option("--seed", pa.seed);
  probe->add_flag("--alpha-only", pa.alpha_only, "truncate history to the front-end capacity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(ta);
    if (eval->parsed()) return cmd_eval(ea);
    if (gen->parsed()) return cmd_generate(ga);
    if (rerank->parsed()) return cmd_rerank(ra);
    if (probe->parsed()) return cmd_probe(pa);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
