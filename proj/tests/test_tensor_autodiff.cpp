#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "gencnn/autodiff.hpp"
#include "gencnn/rng.hpp"
#include "testutil.hpp"

using namespace gencnn;

namespace {

// independent triple-loop product, the oracle for matmul
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] = acc;
    }
  }
  return c;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double range = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-range, range);
  return t;
}

}  // namespace

TEST_CASE("matmul identity and hand examples") {
  Tape tape;
  Var i2 = tape.input(Tensor::from({2, 2}, {1, 0, 0, 1}));
  Var col = tape.input(Tensor::from({2, 1}, {3, 4}));
  Var r = tape.matmul(i2, col);
  CHECK(tape.value(r)[0] == doctest::Approx(3.0));
  CHECK(tape.value(r)[1] == doctest::Approx(4.0));

  Var row = tape.input(Tensor::from({1, 2}, {1, 2}));
  Var s = tape.matmul(row, col);
  CHECK(tape.value(s).size() == 1);
  CHECK(tape.value(s)[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(42);
  Tape tape;
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Var r = tape.matmul(tape.input(a), tape.input(b));
  Tensor expect = naive_matmul(a, b);
  for (int64_t i = 0; i < expect.size(); ++i) {
    CHECK(std::abs(tape.value(r)[i] - expect[i]) < 1e-12);
  }
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
  Tape tape;
  Var a = tape.input(Tensor::zeros({3, 4}));
  Var b = tape.input(Tensor::zeros({5, 2}));
  try {
    tape.matmul(a, b);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("[3x4]") != std::string::npos);
    CHECK(msg.find("[5x2]") != std::string::npos);
  }
}

TEST_CASE("activation values") {
  Tape tape;
  Var x = tape.input(Tensor::row({-2.0, 3.0, 0.0}));
  Var r = tape.activation(x, Activation::relu);
  CHECK(tape.value(r)[0] == 0.0);
  CHECK(tape.value(r)[1] == 3.0);
  CHECK(tape.value(r)[2] == 0.0);

  Var s0 = tape.activation(tape.input(Tensor::row({0.0})), Activation::sigmoid);
  CHECK(tape.value(s0)[0] == doctest::Approx(0.5).epsilon(1e-12));
  // 1/(1 + 1/3) = 0.75
  Var s1 = tape.activation(tape.input(Tensor::row({std::log(3.0)})), Activation::sigmoid);
  CHECK(tape.value(s1)[0] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("backward of a plain sum is all ones") {
  Tape tape;
  Tensor p = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Var leafv = tape.leaf(p, 0);
  Var loss = tape.sum(leafv);
  GradientMap grads;
  tape.backward(loss, grads);
  const Tensor& g = grads.at(0);
  REQUIRE(g.same_shape(p));
  for (int64_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(1.0));
}

TEST_CASE("backward of sigmoid(w.x) at w=0 gives sigma'(0)*x") {
  Tape tape;
  Tensor w = Tensor::zeros({1, 2});
  Tensor b = Tensor::zeros({1});
  Var scores = tape.affine(tape.leaf(w, 0), tape.input(Tensor::row({1.0, 2.0})), tape.leaf(b, 1));
  Var y = tape.activation(scores, Activation::sigmoid);
  Var loss = tape.sum(y);
  GradientMap grads;
  tape.backward(loss, grads);
  CHECK(grads.at(0)[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(grads.at(0)[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tape tape;
  Var v = tape.input(Tensor::row({1.0, 2.0}));
  GradientMap grads;
  CHECK_THROWS_AS(tape.backward(v, grads), std::logic_error);
}

TEST_CASE("leaves off the loss path receive zero gradients of their shape") {
  Tape tape;
  Tensor used = Tensor::row({1.0, 2.0});
  Tensor unused = Tensor::zeros({3, 2});
  Var u = tape.leaf(used, 7);
  tape.leaf(unused, 9);
  Var loss = tape.sum(u);
  GradientMap grads;
  tape.backward(loss, grads);
  REQUIRE(grads.has(9));
  CHECK(grads.at(9).same_shape(unused));
  for (int64_t i = 0; i < grads.at(9).size(); ++i) CHECK(grads.at(9)[i] == 0.0);
}

TEST_CASE("a parameter used twice accumulates both path gradients") {
  Tape tape;
  Tensor w = Tensor::from({2, 2}, {0.5, -0.25, 1.0, 0.75});
  Tensor b = Tensor::zeros({2});
  Var wv = tape.leaf(w, 0);
  Var bv = tape.leaf(b, 1);
  Tensor x1 = Tensor::row({1.0, 2.0});
  Tensor x2 = Tensor::row({-3.0, 0.5});
  Var y1 = tape.affine(wv, tape.input(x1), bv);
  Var y2 = tape.affine(wv, tape.input(x2), bv);
  Var loss = tape.sum(tape.add(y1, y2));
  GradientMap grads;
  tape.backward(loss, grads);
  // d/dw sum(w x1 + w x2) = ones (x1 + x2)^T replicated per output row
  for (int r = 0; r < 2; ++r) {
    CHECK(grads.at(0)[r * 2 + 0] == doctest::Approx(x1[0] + x2[0]));
    CHECK(grads.at(0)[r * 2 + 1] == doctest::Approx(x1[1] + x2[1]));
  }
  CHECK(grads.at(1)[0] == doctest::Approx(2.0));
  CHECK(grads.at(1)[1] == doctest::Approx(2.0));
}

TEST_CASE("forward results are deterministic for identical inputs") {
  Rng rng(5);
  Tensor a = random_tensor({7, 9}, rng);
  Tensor b = random_tensor({9, 5}, rng);
  auto run = [&]() {
    Tape tape(false);
    Var r = tape.matmul(tape.input(a), tape.input(b));
    return tape.value(r).clone();
  };
  Tensor r1 = run();
  Tensor r2 = run();
  for (int64_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("composite graphs pass central finite differences") {
  // exercise every primitive that the model builds on
  Rng rng(1234);
  std::vector<Param> params;
  auto add_param = [&](const std::string& name, std::vector<int> shape) {
    Param p;
    p.name = name;
    p.value = random_tensor(std::move(shape), rng);
    p.leaf_id = static_cast<int>(params.size());
    params.push_back(p);
    return p.leaf_id;
  };
  int table = add_param("table", {5, 3});
  int w_shared = add_param("w_shared", {2, 6});
  int b_shared = add_param("b_shared", {2});
  int w_loc = add_param("w_loc", {3, 2, 6});
  int b_loc = add_param("b_loc", {3, 2});
  int wg = add_param("wg", {2, 12});
  int bg = add_param("bg", {2});
  int w_out = add_param("w_out", {4, 8});
  int b_out = add_param("b_out", {4});

  Tensor x_fixed = random_tensor({4, 3}, rng);

  auto build = [&](Tape& tape) {
    Var tablev = tape.leaf(params[0].value, table);
    std::vector<RowSource> rows = {{RowSource::table_row, 1},
                                   {RowSource::zeros, 0},
                                   {RowSource::table_row, 4},
                                   {RowSource::injected, 0}};
    Var injected = tape.activation(tape.input(x_fixed), Activation::sigmoid);
    Var inj_row = tape.reshape(tape.sum(injected), {1});
    // expand the scalar to a length-3 row through affine with a fixed matrix
    Var expand = tape.affine(tape.input(Tensor::from({3, 1}, {1.0, -0.5, 2.0})), inj_row,
                             tape.input(Tensor::zeros({3})));
    Var slots = tape.compose_rows(tablev, rows, {expand});
    Var seg = tape.windows(slots, 2, 1);  // [3 x 6]
    Var tf = tape.linear_shared(seg, tape.leaf(params[1].value, w_shared),
                                tape.leaf(params[2].value, b_shared));
    Var ta = tape.linear_per_loc(seg, tape.leaf(params[3].value, w_loc),
                                 tape.leaf(params[4].value, b_loc));
    Var fm = tape.activation(tape.concat_cols(tf, ta), Activation::relu);  // [3 x 4]
    Var gate_in = tape.windows(seg, 2, 2);                                 // [1 x 12]
    Var logits = tape.linear_shared(gate_in, tape.leaf(params[5].value, wg),
                                    tape.leaf(params[6].value, bg));
    Var half = tape.scale(logits, 0.5);
    Var g = tape.activation(half, Activation::sigmoid);
    // fm has 3 rows and 4 columns; pair_combine wants g as [1 x 4]
    Var gwide = tape.concat_cols(g, g);
    Var gated = tape.pair_combine(fm, gwide, false);  // [2 x 4]
    Var flat = tape.reshape(gated, {8});
    Var scores = tape.row_gather_affine(tape.leaf(params[7].value, w_out),
                                        tape.leaf(params[8].value, b_out), {0, 2, 3}, flat);
    // fold in log_softmax and cross entropy
    Var ls = tape.log_softmax(scores);
    Var nll = tape.cross_entropy_logits(scores, 1);
    return tape.add(tape.scale(tape.sum(ls), 0.25), nll);
  };

  Tape tape;
  Var loss = build(tape);
  GradientMap analytic;
  tape.backward(loss, analytic);

  std::vector<Param*> ptrs;
  for (auto& p : params) ptrs.push_back(&p);
  auto loss_value = [&]() {
    Tape t(false);
    Var l = build(t);
    return t.value(l)[0];
  };
  auto res = testutil::fd_check(ptrs, loss_value, analytic);
  INFO(res.worst);
  CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("hard gating picks a side and passes odd rows through") {
  Tape tape;
  Tensor fm = Tensor::from({3, 2}, {1, 10, 2, 20, 3, 30});
  Tensor g = Tensor::from({1, 2}, {0.9, 0.1});
  Var out = tape.pair_combine(tape.input(fm), tape.input(g), true);
  const Tensor& v = tape.value(out);
  REQUIRE(v.rows() == 2);
  CHECK(v[0] == 1.0);   // g=0.9 -> left
  CHECK(v[1] == 20.0);  // g=0.1 -> right
  CHECK(v[2] == 3.0);   // odd row copied
  CHECK(v[3] == 30.0);
}
