#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gencnn/model_io.hpp"
#include "testutil.hpp"

namespace {

std::string bin() {
  const char* b = std::getenv("GENCNN_BIN");
  REQUIRE_MESSAGE(b != nullptr, "GENCNN_BIN must point at the gencnn executable");
  return b;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  RunResult r;
  std::string cmd = bin() + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

int line_count(const std::string& text) {
  int n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  return n;
}

const char* kSmallFlags =
    " --l-alpha 8 --l-beta 5 --window 2 --embed-dim 10 --tf-maps 5,4 --ta-maps 5,4"
    " --fc-dim 12 --max-vocab 40 --clusters 3 --batch-size 16";

std::string toy_corpus() {
  return
      "the cat sat on the mat\n"
      "the dog ran to the park\n"
      "a bird flew over the house\n"
      "the cat ran to the house\n"
      "a dog sat on the park\n";
}

}  // namespace

TEST_CASE("seeded training is reproducible byte for byte") {
  testutil::TempDir tmp("cli_det");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  std::string common = "train --corpus " + tmp.path("toy.txt") + kSmallFlags +
                       " --epochs 2 --seed 7 --out ";
  CHECK(run(common + tmp.path("a.bin")).exit_code == 0);
  CHECK(run(common + tmp.path("b.bin")).exit_code == 0);
  CHECK(testutil::read_file(tmp.path("a.bin")) == testutil::read_file(tmp.path("b.bin")));
}

TEST_CASE("configuration violations exit with a usage error") {
  testutil::TempDir tmp("cli_usage");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  RunResult r = run("train --corpus " + tmp.path("toy.txt") + " --out " + tmp.path("m.bin") +
                    " --l-alpha 2 --window 3");
  CHECK(r.exit_code == 1);
}

TEST_CASE("missing files exit with an I/O error") {
  testutil::TempDir tmp("cli_io");
  RunResult r = run("eval --model " + tmp.path("missing.bin") + " --corpus " + tmp.path("x.txt"));
  CHECK(r.exit_code == 2);
}

TEST_CASE("the saved configuration records the ablation switch") {
  testutil::TempDir tmp("cli_ab");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  RunResult r = run("train --corpus " + tmp.path("toy.txt") + kSmallFlags +
                    " --epochs 0 --ablation time_flow_only --out " + tmp.path("m.bin"));
  REQUIRE(r.exit_code == 0);
  gencnn::LoadedModel m = gencnn::load_model(tmp.path("m.bin"));
  CHECK(m.params.config.ablation == gencnn::Ablation::time_flow_only);
}

TEST_CASE("an untrained zero model reports perplexity |V|") {
  testutil::TempDir tmp("cli_uniform");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  RunResult t = run("train --corpus " + tmp.path("toy.txt") + kSmallFlags +
                    " --epochs 0 --init-range 0 --out " + tmp.path("m.bin"));
  REQUIRE(t.exit_code == 0);
  gencnn::LoadedModel m = gencnn::load_model(tmp.path("m.bin"));
  RunResult e = run("eval --model " + tmp.path("m.bin") + " --corpus " + tmp.path("toy.txt"));
  REQUIRE(e.exit_code == 0);
  std::ostringstream expect;
  expect << "ppl=" << m.vocab.size() << ".000000";
  CHECK(e.out.find(expect.str()) != std::string::npos);
  CHECK(e.out.find("mode=static") == 0);
}

TEST_CASE("dynamic evaluation beats static on a repetitive test file") {
  testutil::TempDir tmp("cli_dyn");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  std::string repeated;
  for (int i = 0; i < 40; ++i) repeated += "bird park mat dog cat\n";
  testutil::write_file(tmp.path("rep.txt"), repeated);
  RunResult t = run("train --corpus " + tmp.path("toy.txt") + kSmallFlags +
                    " --epochs 2 --seed 3 --out " + tmp.path("m.bin"));
  REQUIRE(t.exit_code == 0);

  auto ppl_of = [](const std::string& text) {
    size_t pos = text.find("ppl=");
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + 4));
  };
  RunResult stat = run("eval --model " + tmp.path("m.bin") + " --corpus " + tmp.path("rep.txt"));
  RunResult dyn =
      run("eval --dynamic --model " + tmp.path("m.bin") + " --corpus " + tmp.path("rep.txt"));
  REQUIRE(stat.exit_code == 0);
  REQUIRE(dyn.exit_code == 0);
  CHECK(dyn.out.find("mode=dynamic") == 0);
  CHECK(ppl_of(dyn.out) < ppl_of(stat.out));

  // dynamic mode never writes back to the model file
  RunResult stat2 = run("eval --model " + tmp.path("m.bin") + " --corpus " + tmp.path("rep.txt"));
  CHECK(stat2.out == stat.out);
}

TEST_CASE("generate emits exactly n lines and honors the prefix") {
  testutil::TempDir tmp("cli_gen");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  RunResult t = run("train --corpus " + tmp.path("toy.txt") + kSmallFlags +
                    " --epochs 1 --seed 3 --out " + tmp.path("m.bin"));
  REQUIRE(t.exit_code == 0);
  RunResult g = run("generate --model " + tmp.path("m.bin") + " --n 3 --seed 1 --max-length 8");
  REQUIRE(g.exit_code == 0);
  CHECK(line_count(g.out) == 3);

  RunResult p = run("generate --model " + tmp.path("m.bin") +
                    " --n 1 --seed 1 --max-length 8 --prefix \"the cat\"");
  REQUIRE(p.exit_code == 0);
  CHECK(p.out.rfind("the cat", 0) == 0);

  RunResult same = run("generate --model " + tmp.path("m.bin") + " --n 3 --seed 1 --max-length 8");
  CHECK(same.out == g.out);
}

TEST_CASE("rerank endpoints behave and emit the genCNN feature") {
  testutil::TempDir tmp("cli_rr");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  RunResult t = run("train --corpus " + tmp.path("toy.txt") + kSmallFlags +
                    " --epochs 1 --seed 3 --out " + tmp.path("m.bin"));
  REQUIRE(t.exit_code == 0);
  testutil::write_file(tmp.path("nb.txt"),
                       "0 ||| the cat sat ||| lm= -4 ||| -2.0\n"
                       "0 ||| cat the sat ||| lm= -5 ||| -1.0\n"
                       "0 ||| sat sat sat ||| lm= -6 ||| -1.5\n");
  RunResult r0 = run("rerank --model " + tmp.path("m.bin") + " --nbest " + tmp.path("nb.txt") +
                     " --lambda 0");
  REQUIRE(r0.exit_code == 0);
  std::istringstream lines(r0.out);
  std::string l1, l2, l3;
  std::getline(lines, l1);
  std::getline(lines, l2);
  std::getline(lines, l3);
  CHECK(l1.find("cat the sat") != std::string::npos);   // -1.0 best
  CHECK(l2.find("sat sat sat") != std::string::npos);   // -1.5
  CHECK(l3.find("the cat sat") != std::string::npos);   // -2.0
  CHECK(r0.out.find("genCNN= ") != std::string::npos);

  RunResult bad = run("rerank --model " + tmp.path("m.bin") + " --nbest " + tmp.path("nb.txt") +
                      " --lambda 1.5");
  CHECK(bad.exit_code == 1);
}

TEST_CASE("probe prints a csv with one row per distance") {
  testutil::TempDir tmp("cli_probe");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  RunResult t = run("train --corpus " + tmp.path("toy.txt") + kSmallFlags +
                    " --epochs 1 --seed 3 --out " + tmp.path("m.bin"));
  REQUIRE(t.exit_code == 0);
  RunResult p = run("probe --model " + tmp.path("m.bin") + " --corpus " + tmp.path("toy.txt") +
                    " --k-max 5 --trials 4 --seed 9");
  REQUIRE(p.exit_code == 0);
  CHECK(p.out.rfind("k,mean_abs_dlogp,n", 0) == 0);
  CHECK(line_count(p.out) == 6);  // header + 5 rows
}

TEST_CASE("a foreign vocabulary file is refused by hash") {
  testutil::TempDir tmp("cli_hash");
  testutil::write_file(tmp.path("toy.txt"), toy_corpus());
  RunResult t = run("train --corpus " + tmp.path("toy.txt") + kSmallFlags +
                    " --epochs 0 --save-vocab " + tmp.path("v.tsv") + " --out " + tmp.path("m.bin"));
  REQUIRE(t.exit_code == 0);

  RunResult ok = run("eval --model " + tmp.path("m.bin") + " --corpus " + tmp.path("toy.txt") +
                     " --vocab " + tmp.path("v.tsv"));
  CHECK(ok.exit_code == 0);

  testutil::write_file(tmp.path("other.tsv"), "<unk>\t0\t0\n</s>\t5\t0\nzzz\t9\t0\n");
  RunResult bad = run("eval --model " + tmp.path("m.bin") + " --corpus " + tmp.path("toy.txt") +
                      " --vocab " + tmp.path("other.tsv"));
  CHECK(bad.exit_code == 2);
}
