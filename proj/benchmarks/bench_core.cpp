#include <benchmark/benchmark.h>

#include <sstream>

#include "gencnn/evaluation.hpp"
#include "gencnn/training.hpp"

using namespace gencnn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

struct Fixture {
  ModelConfig cfg;
  Vocabulary vocab;
  ParameterSet ps;
  std::vector<int> history;

  Fixture() : vocab(make_vocab()), ps(make_params(cfg = make_config(), vocab)) {
    for (int i = 0; i < 40; ++i) history.push_back(2 + i % (vocab.size() - 2));
  }

  static ModelConfig make_config() {
    ModelConfig c;
    c.l_alpha = 20;
    c.l_beta = 12;
    c.embed_dim = 32;
    c.window = 3;
    c.tf_maps = {24, 16};
    c.ta_maps = {24, 16};
    c.fc_dim = 64;
    c.cluster_count = 16;
    return c;
  }

  static Vocabulary make_vocab() {
    std::ostringstream os;
    Rng rng(5);
    for (int line = 0; line < 200; ++line) {
      for (int t = 0; t < 20; ++t) os << "tok" << rng.below(1000) << " ";
      os << "\n";
    }
    std::istringstream in(os.str());
    return build_vocabulary(in, 1000, 16);
  }

  static ParameterSet make_params(const ModelConfig& cfg, const Vocabulary& vocab) {
    TrainConfig tc;
    return init_params(cfg, tc, vocab, 1);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Rng rng(2);
  Tensor a = random_tensor({n, n}, rng);
  Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Tape tape(false);
    Var r = tape.matmul(tape.input(a), tape.input(b));
    benchmark::DoNotOptimize(tape.value(r).data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * static_cast<int64_t>(n) * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

static void BM_ForwardLongHistory(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    Tensor phi = forward_repr(f.ps, f.history);
    benchmark::DoNotOptimize(phi.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForwardLongHistory);

static void BM_TrainInstance(benchmark::State& state) {
  Fixture& f = fixture();
  Tape tape;
  GradientMap grads;
  for (auto _ : state) {
    tape.reset();
    Var nll = instance_nll(tape, f.ps, f.history, 3, SoftmaxMode::full, f.vocab);
    tape.backward(nll, grads, 1.0);
    benchmark::DoNotOptimize(grads);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TrainInstance);

static void BM_HierarchicalInstance(benchmark::State& state) {
  Fixture& f = fixture();
  Tape tape;
  GradientMap grads;
  for (auto _ : state) {
    tape.reset();
    Var nll = instance_nll(tape, f.ps, f.history, 3, SoftmaxMode::hierarchical, f.vocab);
    tape.backward(nll, grads, 1.0);
    benchmark::DoNotOptimize(grads);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HierarchicalInstance);

static void BM_FullDistribution(benchmark::State& state) {
  Fixture& f = fixture();
  Tensor phi = forward_repr(f.ps, f.history);
  for (auto _ : state) {
    Tensor p = predict_full(f.ps, phi);
    benchmark::DoNotOptimize(p.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FullDistribution);

BENCHMARK_MAIN();
