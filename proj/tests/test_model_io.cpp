#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gencnn/errors.hpp"
#include "gencnn/model_io.hpp"
#include "gencnn/training.hpp"
#include "testutil.hpp"

using namespace gencnn;

namespace {

ModelConfig io_config() {
  ModelConfig c;
  c.l_alpha = 10;
  c.l_beta = 8;
  c.embed_dim = 6;
  c.window = 3;
  c.tf_maps = {5, 4};
  c.ta_maps = {3, 2};
  c.fc_dim = 11;
  c.cluster_count = 3;
  c.ablation = Ablation::time_flow_only;
  c.gate_mode = GateMode::hard;
  return c;
}

Vocabulary io_vocab() {
  std::istringstream in("alpha beta gamma delta epsilon zeta\nalpha beta\n");
  return build_vocabulary(in, 8, 3);
}

}  // namespace

TEST_CASE("models round-trip through disk at 32-bit precision") {
  testutil::TempDir tmp("io");
  ModelConfig cfg = io_config();
  Vocabulary vocab = io_vocab();
  TrainConfig tc;
  ParameterSet ps = init_params(cfg, tc, vocab, 99);
  for (Param* p : ps.params()) {
    for (int64_t i = 0; i < p->accum.size(); ++i) p->accum[i] = 0.5 + 0.001 * static_cast<double>(i % 7);
  }

  save_model(tmp.path("m.bin"), ps, vocab);
  LoadedModel loaded = load_model(tmp.path("m.bin"));

  CHECK(loaded.vocab.serialize() == vocab.serialize());
  CHECK(loaded.params.config.l_alpha == cfg.l_alpha);
  CHECK(loaded.params.config.l_beta == cfg.l_beta);
  CHECK(loaded.params.config.embed_dim == cfg.embed_dim);
  CHECK(loaded.params.config.window == cfg.window);
  CHECK(loaded.params.config.tf_maps == cfg.tf_maps);
  CHECK(loaded.params.config.ta_maps == cfg.ta_maps);
  CHECK(loaded.params.config.fc_dim == cfg.fc_dim);
  CHECK(loaded.params.config.cluster_count == cfg.cluster_count);
  CHECK(loaded.params.config.ablation == cfg.ablation);
  CHECK(loaded.params.config.gate_mode == cfg.gate_mode);

  auto src = ps.params();
  auto dst = loaded.params.params();
  REQUIRE(src.size() == dst.size());
  for (size_t i = 0; i < src.size(); ++i) {
    CHECK(src[i]->name == dst[i]->name);
    REQUIRE(src[i]->value.same_shape(dst[i]->value));
    for (int64_t j = 0; j < src[i]->value.size(); ++j) {
      CHECK(dst[i]->value[j] == static_cast<double>(static_cast<float>(src[i]->value[j])));
      CHECK(dst[i]->accum[j] == static_cast<double>(static_cast<float>(src[i]->accum[j])));
    }
  }
}

TEST_CASE("save-load-save produces byte-identical files") {
  testutil::TempDir tmp("io2");
  ModelConfig cfg = io_config();
  Vocabulary vocab = io_vocab();
  TrainConfig tc;
  ParameterSet ps = init_params(cfg, tc, vocab, 7);

  save_model(tmp.path("a.bin"), ps, vocab);
  LoadedModel loaded = load_model(tmp.path("a.bin"));
  save_model(tmp.path("b.bin"), loaded.params, loaded.vocab);
  CHECK(testutil::read_file(tmp.path("a.bin")) == testutil::read_file(tmp.path("b.bin")));
}

TEST_CASE("alien magic and unknown versions are rejected up front") {
  testutil::TempDir tmp("io3");

  testutil::write_file(tmp.path("junk.bin"), "NOTAMODEL-at-all");
  CHECK_THROWS_AS(load_model(tmp.path("junk.bin")), IoError);

  // valid magic, bumped version
  std::string bytes = "GENCNN1";
  bytes += '\x02';
  bytes += '\x00';
  bytes += '\x00';
  bytes += '\x00';
  std::ofstream out(tmp.path("future.bin"), std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  try {
    load_model(tmp.path("future.bin"));
    FAIL("expected rejection");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  CHECK_THROWS_AS(load_model(tmp.path("missing.bin")), IoError);
}

TEST_CASE("truncated tensor payloads are detected") {
  testutil::TempDir tmp("io4");
  ModelConfig cfg = io_config();
  Vocabulary vocab = io_vocab();
  ParameterSet ps = ParameterSet::create(cfg, vocab.size());
  save_model(tmp.path("full.bin"), ps, vocab);
  std::string bytes = testutil::read_file(tmp.path("full.bin"));
  testutil::write_file(tmp.path("cut.bin"), bytes.substr(0, bytes.size() - 64));
  CHECK_THROWS_AS(load_model(tmp.path("cut.bin")), IoError);
}
