#include "doctest.h"

#include <cmath>
#include <vector>

#include "lptgnn/errors.hpp"
#include "lptgnn/tape.hpp"

#include "test_support.hpp"

using namespace lptgnn;
using testsupport::check_gradients;
using testsupport::random_tensor;

namespace {

// Rolls a tensor output into a scalar with fixed non-uniform weights so
// gradient checks exercise every output element independently.
Var weighted(Tape& tape, Var y, const Tensor& weights) {
  return tape.sum_all(tape.mul(y, tape.leaf(weights)));
}

Tensor coeffs(const Shape& shape, std::uint64_t seed) {
  SplitRng rng(seed, 99);
  return random_tensor(shape, rng);
}

Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
  std::int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  std::int64_t O = w.dim(0), k = w.dim(2), pad = k / 2;
  Tensor out({O, H, W});
  for (std::int64_t o = 0; o < O; ++o)
    for (std::int64_t i = 0; i < H; ++i)
      for (std::int64_t j = 0; j < W; ++j) {
        double acc = b[o];
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t di = 0; di < k; ++di)
            for (std::int64_t dj = 0; dj < k; ++dj) {
              std::int64_t si = i + di - pad, sj = j + dj - pad;
              if (si < 0 || si >= H || sj < 0 || sj >= W) continue;
              acc += x.at({c, si, sj}) * w.at({o, c, di, dj});
            }
        out.at({o, i, j}) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("broadcast shape rules") {
  CHECK(broadcast_shape({2, 3}, {2, 3}) == Shape{2, 3});
  CHECK(broadcast_shape({2, 3}, {3}) == Shape{2, 3});
  CHECK(broadcast_shape({2, 1, 3}, {4, 3}) == Shape{2, 4, 3});
  CHECK(broadcast_shape({}, {2, 3}) == Shape{2, 3});
  CHECK_THROWS_AS(broadcast_shape({2}, {3}), ShapeError);
}

TEST_CASE("reduce_to_shape sums broadcast modes") {
  Tensor src({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = reduce_to_shape(src, {3});
  CHECK(row.vec() == std::vector<double>{5, 7, 9});
  Tensor col = reduce_to_shape(src, {2, 1});
  CHECK(col.vec() == std::vector<double>{6, 15});
  Tensor all = reduce_to_shape(src, {});
  CHECK(all[0] == 21);
}

TEST_CASE("add values and gradients") {
  Tape tape;
  Var a = tape.leaf(Tensor({2}, {1, 2}));
  Var b = tape.leaf(Tensor({2}, {3, 4}));
  CHECK(tape.value(tape.add(a, b)).vec() == std::vector<double>{4, 6});
  CHECK_THROWS_AS(tape.add(a, tape.leaf(Tensor(Shape{3}))), ShapeError);

  SplitRng rng(1, 0);
  Tensor w = coeffs({2, 3}, 1);
  check_gradients({random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
                  [&](Tape& t, const std::vector<Var>& in) {
                    return weighted(t, t.add(in[0], in[1]), w);
                  });
}

TEST_CASE("scale values and gradients") {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1, -2}));
  CHECK(tape.value(tape.scale(x, -3.0)).vec() == std::vector<double>{-3, 6});

  SplitRng rng(2, 0);
  Tensor w = coeffs({4}, 2);
  check_gradients({random_tensor({4}, rng)}, [&](Tape& t, const std::vector<Var>& in) {
    return weighted(t, t.scale(in[0], 2.5), w);
  });
}

TEST_CASE("add_bias broadcasts over leading modes") {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = tape.leaf(Tensor({3}, {10, 20, 30}));
  CHECK(tape.value(tape.add_bias(x, b)).vec() == std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK_THROWS_AS(tape.add_bias(x, tape.leaf(Tensor(Shape{2}))), ShapeError);

  SplitRng rng(3, 0);
  Tensor w = coeffs({2, 3}, 3);
  check_gradients({random_tensor({2, 3}, rng), random_tensor({3}, rng)},
                  [&](Tape& t, const std::vector<Var>& in) {
                    return weighted(t, t.add_bias(in[0], in[1]), w);
                  });
}

TEST_CASE("mul with right-aligned broadcasting") {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = tape.leaf(Tensor({3}, {1, 0, -1}));
  CHECK(tape.value(tape.mul(a, b)).vec() == std::vector<double>{1, 0, -3, 4, 0, -6});
  Var c = tape.leaf(Tensor({2, 1}, {10, 100}));
  CHECK(tape.value(tape.mul(a, c)).vec() == std::vector<double>{10, 20, 30, 400, 500, 600});

  SplitRng rng(4, 0);
  Tensor w = coeffs({2, 3}, 4);
  check_gradients({random_tensor({2, 3}, rng), random_tensor({3}, rng)},
                  [&](Tape& t, const std::vector<Var>& in) {
                    return weighted(t, t.mul(in[0], in[1]), w);
                  });
  check_gradients({random_tensor({2, 1}, rng), random_tensor({2, 3}, rng)},
                  [&](Tape& t, const std::vector<Var>& in) {
                    return weighted(t, t.mul(in[0], in[1]), w);
                  });
}

TEST_CASE("matmul values and gradients") {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = tape.leaf(Tensor({3, 2}, {7, 8, 9, 10, 11, 12}));
  CHECK(tape.value(tape.matmul(a, b)).vec() == std::vector<double>{58, 64, 139, 154});
  CHECK_THROWS_AS(tape.matmul(a, a), ShapeError);

  SplitRng rng(5, 0);
  Tensor w = coeffs({3, 4}, 5);
  check_gradients({random_tensor({3, 2}, rng), random_tensor({2, 4}, rng)},
                  [&](Tape& t, const std::vector<Var>& in) {
                    return weighted(t, t.matmul(in[0], in[1]), w);
                  });
}

TEST_CASE("relu values and gradients away from the kink") {
  Tape tape;
  Var x = tape.leaf(Tensor({4}, {-1.5, -0.3, 0.4, 2.0}));
  CHECK(tape.value(tape.relu(x)).vec() == std::vector<double>{0, 0, 0.4, 2.0});

  Tensor w = coeffs({4}, 6);
  check_gradients({Tensor({4}, {-1.5, -0.3, 0.4, 2.0})},
                  [&](Tape& t, const std::vector<Var>& in) {
                    return weighted(t, t.relu(in[0]), w);
                  });
}

TEST_CASE("permute values and gradients") {
  Tape tape;
  SplitRng rng(7, 0);
  Tensor x = random_tensor({2, 3, 4}, rng);
  Var v = tape.leaf(x);
  Var p = tape.permute(v, {2, 0, 1});
  CHECK(tape.value(p).shape() == Shape{4, 2, 3});
  CHECK(tape.value(p).at({3, 1, 2}) == x.at({1, 2, 3}));
  CHECK(tape.value(p).at({0, 0, 1}) == x.at({0, 1, 0}));
  CHECK_THROWS_AS(tape.permute(v, {0, 1}), ShapeError);
  CHECK_THROWS_AS(tape.permute(v, {0, 0, 1}), ShapeError);

  Tensor w = coeffs({4, 2, 3}, 7);
  check_gradients({x}, [&](Tape& t, const std::vector<Var>& in) {
    return weighted(t, t.permute(in[0], {2, 0, 1}), w);
  });
}

TEST_CASE("reshape gradients pass through") {
  SplitRng rng(8, 0);
  Tensor w = coeffs({6}, 8);
  check_gradients({random_tensor({2, 3}, rng)}, [&](Tape& t, const std::vector<Var>& in) {
    return weighted(t, t.reshape(in[0], {6}), w);
  });
}

TEST_CASE("sum_axis values and gradients") {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  CHECK(tape.value(tape.sum_axis(x, 0)).vec() == std::vector<double>{5, 7, 9});
  CHECK(tape.value(tape.sum_axis(x, 1)).vec() == std::vector<double>{6, 15});
  CHECK_THROWS_AS(tape.sum_axis(x, 2), ShapeError);

  SplitRng rng(9, 0);
  Tensor x3 = random_tensor({2, 3, 4}, rng);
  for (int axis : {0, 1, 2}) {
    Shape out;
    for (int i = 0; i < 3; ++i)
      if (i != axis) out.push_back(x3.dim(i));
    Tensor w = coeffs(out, 9 + static_cast<std::uint64_t>(axis));
    check_gradients({x3}, [&, axis](Tape& t, const std::vector<Var>& in) {
      return weighted(t, t.sum_axis(in[0], axis), w);
    });
  }
}

TEST_CASE("sum_all and quadratic gradient") {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 2}, {1, 2, 3, 4}), true);
  Var loss = tape.sum_all(tape.mul(x, x));
  CHECK(tape.value(loss)[0] == 30);
  tape.backward(loss);
  CHECK(tape.grad(x).vec() == std::vector<double>{2, 4, 6, 8});
}

TEST_CASE("max_axis0 values and tie handling") {
  Tape tape;
  Var x = tape.leaf(Tensor({3, 2}, {1, 5, 4, 5, 2, 3}), true);
  Var m = tape.max_axis0(x);
  CHECK(tape.value(m).vec() == std::vector<double>{4, 5});
  Var loss = tape.sum_all(m);
  tape.backward(loss);
  // The 5 is shared by rows 0 and 1; the gradient lands on row 0 only.
  CHECK(tape.grad(x).vec() == std::vector<double>{0, 1, 1, 0, 0, 0});

  Tensor distinct({2, 3}, {1.0, 7.0, -2.0, 3.5, 0.5, 4.0});
  Tensor w = coeffs({3}, 10);
  check_gradients({distinct}, [&](Tape& t, const std::vector<Var>& in) {
    return weighted(t, t.max_axis0(in[0]), w);
  });
}

TEST_CASE("stack_rows values and gradients") {
  Tape tape;
  Var a = tape.leaf(Tensor({2}, {1, 2}));
  Var b = tape.leaf(Tensor({2}, {3, 4}));
  Var s = tape.stack_rows({a, b});
  CHECK(tape.value(s).shape() == Shape{2, 2});
  CHECK(tape.value(s).vec() == std::vector<double>{1, 2, 3, 4});
  CHECK_THROWS_AS(tape.stack_rows({}), ShapeError);
  CHECK_THROWS_AS(tape.stack_rows({a, tape.leaf(Tensor(Shape{3}))}), ShapeError);

  SplitRng rng(11, 0);
  Tensor w = coeffs({3, 2}, 11);
  check_gradients(
      {random_tensor({2}, rng), random_tensor({2}, rng), random_tensor({2}, rng)},
      [&](Tape& t, const std::vector<Var>& in) {
        return weighted(t, t.stack_rows({in[0], in[1], in[2]}), w);
      });
}

TEST_CASE("aggregate_rows means per group") {
  Tape tape;
  Var x = tape.leaf(Tensor({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  Var g = tape.aggregate_rows(x, {{0, 2}, {1}, {3, 3}});
  CHECK(tape.value(g).shape() == Shape{3, 2});
  CHECK(tape.value(g).vec() == std::vector<double>{3, 4, 3, 4, 7, 8});
  CHECK_THROWS_AS(tape.aggregate_rows(x, {{0}, {}}), ShapeError);
  CHECK_THROWS_AS(tape.aggregate_rows(x, {{4}}), ShapeError);

  SplitRng rng(12, 0);
  Tensor w = coeffs({3, 2}, 12);
  check_gradients({random_tensor({4, 2}, rng)}, [&](Tape& t, const std::vector<Var>& in) {
    return weighted(t, t.aggregate_rows(in[0], {{0, 2}, {1}, {3, 3}}), w);
  });
}

TEST_CASE("conv2d matches the direct sum") {
  SplitRng rng(13, 0);
  Tensor x = random_tensor({2, 5, 4}, rng);
  Tensor kw = random_tensor({3, 2, 3, 3}, rng);
  Tensor kb = random_tensor({3}, rng);

  Tape tape;
  Var out = tape.conv2d(tape.leaf(x), tape.leaf(kw), tape.leaf(kb));
  Tensor expected = naive_conv2d(x, kw, kb);
  REQUIRE(tape.value(out).shape() == expected.shape());
  for (std::int64_t i = 0; i < expected.numel(); ++i)
    CHECK(tape.value(out)[i] == doctest::Approx(expected[i]).epsilon(1e-12));

  CHECK_THROWS_AS(tape.conv2d(tape.leaf(x), tape.leaf(Tensor(Shape{3, 2, 2, 2})),
                              tape.leaf(kb)),
                  ShapeError);

  Tensor w = coeffs({3, 5, 4}, 13);
  check_gradients({x, kw, kb}, [&](Tape& t, const std::vector<Var>& in) {
    return weighted(t, t.conv2d(in[0], in[1], in[2]), w);
  });
}

TEST_CASE("maxpool2d values and gradients") {
  Tape tape;
  Tensor x({1, 3, 4}, {1, 2, 3, 4,
                       5, 6, 7, 8,
                       9, 10, 11, 12});
  Var out = tape.maxpool2d(tape.leaf(x));
  CHECK(tape.value(out).shape() == Shape{1, 1, 2});
  CHECK(tape.value(out).vec() == std::vector<double>{6, 8});

  SplitRng rng(14, 0);
  Tensor xr = random_tensor({2, 5, 6}, rng);
  Tape t2;
  CHECK(t2.value(t2.maxpool2d(t2.leaf(xr))).shape() == Shape{2, 2, 3});

  Tensor w = coeffs({2, 2, 3}, 14);
  check_gradients({xr}, [&](Tape& t, const std::vector<Var>& in) {
    return weighted(t, t.maxpool2d(in[0]), w);
  });
}

TEST_CASE("batchnorm_train normalizes with biased statistics") {
  Tape tape;
  Tensor x({2, 2}, {1, 10, 3, 30});
  Var gamma = tape.leaf(Tensor({2}, {1, 1}));
  Var beta = tape.leaf(Tensor({2}, {0, 0}));
  Tape::BatchNormStats stats;
  Var out = tape.batchnorm_train(tape.leaf(x), gamma, beta, &stats);

  CHECK(stats.mean.vec() == std::vector<double>{2, 20});
  CHECK(stats.var.vec() == std::vector<double>{1, 100});
  double e0 = 1.0 / std::sqrt(1.0 + kBatchNormEps);
  double e1 = 10.0 / std::sqrt(100.0 + kBatchNormEps);
  CHECK(tape.value(out).at({0, 0}) == doctest::Approx(-e0).epsilon(1e-12));
  CHECK(tape.value(out).at({1, 0}) == doctest::Approx(e0).epsilon(1e-12));
  CHECK(tape.value(out).at({0, 1}) == doctest::Approx(-e1).epsilon(1e-12));
  CHECK(tape.value(out).at({1, 1}) == doctest::Approx(e1).epsilon(1e-12));

  SplitRng rng(15, 0);
  Tensor w = coeffs({4, 3}, 15);
  check_gradients(
      {random_tensor({4, 3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)},
      [&](Tape& t, const std::vector<Var>& in) {
        return weighted(t, t.batchnorm_train(in[0], in[1], in[2]), w);
      },
      1e-5, 1e-5);
}

TEST_CASE("batchnorm_eval uses the provided running statistics") {
  Tensor mean({2}, {1, -1});
  Tensor var({2}, {4, 0.25});
  Tape tape;
  Var out = tape.batchnorm_eval(tape.leaf(Tensor({1, 2}, {3, 0})),
                                tape.leaf(Tensor({2}, {2, 3})),
                                tape.leaf(Tensor({2}, {10, 20})), mean, var);
  CHECK(tape.value(out).at({0, 0}) ==
        doctest::Approx(10 + 2 * 2.0 / std::sqrt(4 + kBatchNormEps)).epsilon(1e-12));
  CHECK(tape.value(out).at({0, 1}) ==
        doctest::Approx(20 + 3 * 1.0 / std::sqrt(0.25 + kBatchNormEps)).epsilon(1e-12));

  SplitRng rng(16, 0);
  Tensor w = coeffs({3, 2}, 16);
  check_gradients(
      {random_tensor({3, 2}, rng), random_tensor({2}, rng), random_tensor({2}, rng)},
      [&](Tape& t, const std::vector<Var>& in) {
        return weighted(t, t.batchnorm_eval(in[0], in[1], in[2], mean, var), w);
      });
}

TEST_CASE("softmax_ce_sum values and gradients") {
  Tape tape;
  Var logits = tape.leaf(Tensor({2, 2}, {0, 0, 1, 3}));
  Var loss = tape.softmax_ce_sum(logits, {0, 1});
  double expected = -std::log(0.5) - std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(3.0)));
  CHECK(tape.value(loss)[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(tape.softmax_ce_sum(logits, {0}), ShapeError);
  CHECK_THROWS_AS(tape.softmax_ce_sum(logits, {0, 2}), ShapeError);
  CHECK_THROWS_AS(tape.softmax_ce_sum(logits, {0, -1}), ShapeError);

  SplitRng rng(17, 0);
  check_gradients({random_tensor({3, 4}, rng)}, [&](Tape& t, const std::vector<Var>& in) {
    return t.softmax_ce_sum(in[0], {2, 0, 3});
  });
}

TEST_CASE("softmax_rows is a proper distribution") {
  Tensor logits({2, 3}, {1, 1, 1, 0, std::log(3.0), 0});
  Tensor p = softmax_rows(logits);
  for (int j = 0; j < 3; ++j) CHECK(p[j] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(p.at({1, 1}) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(p.at({1, 0}) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("backward contract") {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1, 2}), true);
  Var detached = tape.leaf(Tensor({2}, {5, 5}));
  Var y = tape.add(x, detached);
  Var reused = tape.add(y, y);
  Var loss = tape.sum_all(reused);
  CHECK_THROWS_AS(tape.backward(reused), ShapeError);
  tape.backward(loss);
  CHECK(tape.grad(x).vec() == std::vector<double>{2, 2});
  CHECK_FALSE(tape.has_grad(detached));
  CHECK_THROWS_AS(tape.backward(loss), ShapeError);
}
