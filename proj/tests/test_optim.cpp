#include "doctest.h"

#include <cmath>
#include <vector>

#include "lptgnn/errors.hpp"
#include "lptgnn/optim.hpp"
#include "lptgnn/tape.hpp"

using namespace lptgnn;

TEST_CASE("param store bookkeeping") {
  ParamStore store;
  store.create("b.w", Tensor({2}, {1, 2}));
  store.create("a.w", Tensor::scalar(3));
  CHECK(store.has("a.w"));
  CHECK_FALSE(store.has("c"));
  CHECK(store.size() == 2);
  CHECK(store.scalar_count() == 3);
  CHECK(store.names() == std::vector<std::string>{"a.w", "b.w"});
  CHECK(store.grad("b.w").vec() == std::vector<double>{0, 0});
  CHECK_THROWS_AS(store.create("a.w", Tensor::scalar(0)), ShapeError);
  CHECK_THROWS_AS(store.value("missing"), ShapeError);

  store.create_buffer("bn.mean", Tensor({2}, {0, 0}));
  CHECK(store.has_buffer("bn.mean"));
  CHECK(store.buffer_names() == std::vector<std::string>{"bn.mean"});
  CHECK(store.names() == std::vector<std::string>{"a.w", "b.w"});
  CHECK_THROWS_AS(store.buffer("missing"), ShapeError);

  CHECK(store.step_count() == 0);
  store.set_step_count(7);
  CHECK(store.step_count() == 7);
}

TEST_CASE("glorot std") {
  CHECK(glorot_std(36, 36) == doctest::Approx(std::sqrt(2.0 / 72.0)).epsilon(1e-12));
  CHECK(glorot_std(1, 3) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("normal_tensor is deterministic for a fixed stream") {
  SplitRng a(3, 1), b(3, 1);
  Tensor ta = normal_tensor({2, 3}, 0.1, a);
  Tensor tb = normal_tensor({2, 3}, 0.1, b);
  CHECK(ta.vec() == tb.vec());
  CHECK(ta.shape() == Shape{2, 3});
  bool nonzero = false;
  for (std::int64_t i = 0; i < ta.numel(); ++i) nonzero = nonzero || ta[i] != 0.0;
  CHECK(nonzero);
}

TEST_CASE("adam first step moves by roughly the learning rate") {
  ParamStore store;
  store.create("w", Tensor({2}, {1.0, -1.0}));
  store.grad("w") = Tensor({2}, {0.5, -2.0});
  store.adam_step(0.01);
  CHECK(store.step_count() == 1);
  // m-hat = g, v-hat = g^2, so the update is lr * sign(g) up to epsilon.
  CHECK(store.value("w")[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(store.value("w")[1] == doctest::Approx(-1.0 + 0.01).epsilon(1e-6));
  CHECK(store.grad("w").vec() == std::vector<double>{0, 0});
}

TEST_CASE("adam matches a hand-rolled three-step trace") {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> grads{0.3, -1.2, 0.0};

  ParamStore store;
  store.create("w", Tensor({1}, {2.0}));

  double theta = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    double g = grads[static_cast<std::size_t>(t - 1)];
    store.grad("w")[0] = g;
    store.adam_step(lr, b1, b2, eps);

    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mhat = m / (1 - std::pow(b1, t));
    double vhat = v / (1 - std::pow(b2, t));
    theta -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(store.value("w")[0] == doctest::Approx(theta).epsilon(1e-14));
  }
  CHECK(store.step_count() == 3);
}

TEST_CASE("adam with zero gradients leaves parameters in place") {
  ParamStore store;
  store.create("w", Tensor({2}, {1.5, -0.5}));
  store.adam_step(0.1);
  CHECK(store.value("w").vec() == std::vector<double>{1.5, -0.5});
  CHECK(store.step_count() == 1);
}

TEST_CASE("adam rejects non-finite gradients by name") {
  ParamStore store;
  store.create("enc.w", Tensor({1}, {0.0}));
  store.create("mlp.w", Tensor({1}, {0.0}));
  store.grad("mlp.w")[0] = std::nan("");
  CHECK_THROWS_WITH_AS(store.adam_step(0.1), doctest::Contains("mlp.w"), TrainingError);
}

TEST_CASE("bound params bind values and harvest gradients") {
  ParamStore store;
  store.create("w", Tensor({2}, {3.0, -1.0}));
  store.create("unused", Tensor({1}, {5.0}));

  Tape tape;
  BoundParams params(tape, store);
  Var w = params["w"];
  CHECK(tape.value(w).vec() == std::vector<double>{3.0, -1.0});
  CHECK_THROWS_AS(params["nope"], ShapeError);

  Var loss = tape.sum_all(tape.mul(w, w));
  tape.backward(loss);
  params.harvest();
  CHECK(store.grad("w").vec() == std::vector<double>{6.0, -2.0});
  CHECK(store.grad("unused").vec() == std::vector<double>{0.0});
}

TEST_CASE("bound params collect follows the suffix order") {
  ParamStore store;
  store.create("p.a", Tensor::scalar(1));
  store.create("p.b", Tensor::scalar(2));
  Tape tape;
  BoundParams params(tape, store);
  std::vector<Var> vars = params.collect("p", {".b", ".a"});
  REQUIRE(vars.size() == 2);
  CHECK(tape.value(vars[0])[0] == 2);
  CHECK(tape.value(vars[1])[0] == 1);
}

TEST_CASE("zero_grads clears accumulated slots") {
  ParamStore store;
  store.create("w", Tensor({2}, {0, 0}));
  store.grad("w") = Tensor({2}, {1, 2});
  store.zero_grads();
  CHECK(store.grad("w").vec() == std::vector<double>{0, 0});
}
