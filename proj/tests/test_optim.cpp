// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "rcunet/optim.hpp"
#include "rcunet/tensor_ops.hpp"
#include "test_util.hpp"

using namespace rcunet;
using testutil::random_tensor;

TEST_CASE("parameter store registers and rejects duplicates", "[optim]") {
  ParameterStore<double> ps;
  ps.add("w", Tensor<double>::zeros({2, 3}));
  ps.add("b", Tensor<double>::zeros({3}), true);
  REQUIRE(ps.total_count() == 9);
  REQUIRE(ps.get("b")->recurrent);
  REQUIRE_FALSE(ps.get("w")->recurrent);
  REQUIRE(ps.contains("w"));
  REQUIRE_FALSE(ps.contains("nope"));
  REQUIRE_THROWS_AS(ps.add("w", Tensor<double>::zeros({1})), Error);
  REQUIRE_THROWS_AS(ps.get("nope"), Error);
}

TEST_CASE("adam first step matches the closed form", "[optim]") {
  // With fresh moments, one step gives m_hat = g, v_hat = g^2, so the
  // update is exactly -lr * g / (|g| + eps).
  ParameterStore<double> ps;
  auto p = ps.add("w", Tensor<double>::from({2}, {1.0, -2.0}));
  p->value.grad() = {0.5, -3.0};
  adam_step(ps, 0.01);
  const double eps = 1e-8;
  REQUIRE(p->value.value()[0] ==
          Catch::Approx(1.0 - 0.01 * 0.5 / (0.5 + eps)));
  REQUIRE(p->value.value()[1] ==
          Catch::Approx(-2.0 - 0.01 * -3.0 / (3.0 + eps)));
  REQUIRE(p->step_count == 1);
}

TEST_CASE("adam matches a reference loop over several steps", "[optim]") {
  Rng rng(307);
  const double lr = 0.003, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ParameterStore<double> ps;
  auto p = ps.add("w", Tensor<double>::from({3}, {0.2, -0.4, 1.1}));

  // Independent bookkeeping of the same recurrence.
  std::vector<double> ref = {0.2, -0.4, 1.1};
  std::vector<double> m(3, 0.0), v(3, 0.0);
  for (int step = 1; step <= 7; ++step) {
    std::vector<double> g(3);
    for (auto& x : g) x = rng.uniform(-2.0, 2.0);
    p->value.zero_grad();
    for (int i = 0; i < 3; ++i) p->value.grad()[i] = g[i];
    adam_step(ps, lr, b1, b2, eps);
    for (int i = 0; i < 3; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      double mh = m[i] / (1 - std::pow(b1, step));
      double vh = v[i] / (1 - std::pow(b2, step));
      ref[i] -= lr * mh / (std::sqrt(vh) + eps);
      REQUIRE(p->value.value()[static_cast<std::size_t>(i)] ==
              Catch::Approx(ref[i]).margin(1e-14));
    }
  }
  REQUIRE(p->step_count == 7);
}

TEST_CASE("zero gradient leaves the parameter unchanged", "[optim]") {
  ParameterStore<double> ps;
  auto p = ps.add("w", Tensor<double>::from({2}, {3.0, -1.5}));
  adam_step(ps, 0.1);  // gradient buffer never touched
  REQUIRE(p->value.value()[0] == 3.0);
  REQUIRE(p->value.value()[1] == -1.5);
  REQUIRE(p->step_count == 1);
}

TEST_CASE("gradient accumulation drives training through the store",
          "[optim]") {
  // Minimal end-to-end descent: fit y = w*x on one point.
  ParameterStore<double> ps;
  auto p = ps.add("w", Tensor<double>::from({1}, {0.0}));
  auto x = Tensor<double>::scalar(1.0);
  auto target = Tensor<double>::scalar(2.0);
  double prev = std::abs(p->value.value()[0] - 2.0);
  for (int i = 0; i < 200; ++i) {
    ps.zero_grads();
    Tape<double> tape;
    auto d = sub(mul(p->value, x), target);
    auto loss = mul(d, d);
    tape.backward(loss);
    adam_step(ps, 0.05);
  }
  REQUIRE(std::abs(p->value.value()[0] - 2.0) < prev);
  REQUIRE(p->value.value()[0] == Catch::Approx(2.0).margin(0.05));
}

TEST_CASE("clip_gradients clamps recurrent parameters only by default",
          "[optim]") {
  ParameterStore<double> ps;
  auto pr = ps.add("rec", Tensor<double>::zeros({3}), true);
  auto pn = ps.add("non", Tensor<double>::zeros({3}), false);
  pr->value.grad() = {150.0, -250.0, 7.0};
  pn->value.grad() = {150.0, -250.0, 7.0};
  clip_gradients(ps, 100.0);
  REQUIRE(pr->value.grad() == std::vector<double>{100.0, -100.0, 7.0});
  REQUIRE(pn->value.grad() == std::vector<double>{150.0, -250.0, 7.0});

  clip_gradients(ps, 100.0, true);
  REQUIRE(pn->value.grad() == std::vector<double>{100.0, -100.0, 7.0});
  REQUIRE_THROWS_AS(clip_gradients(ps, 0.0), Error);
}

TEST_CASE("uniform fan-in init stays inside its bound", "[optim]") {
  Rng rng(311);
  auto t = Tensor<double>::zeros({64, 32});
  fill_uniform_fan_in(t, 64, rng);
  const double bound = std::sqrt(1.0 / 64.0);
  double lo = 1e9, hi = -1e9;
  for (auto v : t.value()) {
    REQUIRE(std::abs(v) <= bound);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Ranges actually get used, not collapsed near zero.
  REQUIRE(hi > 0.8 * bound);
  REQUIRE(lo < -0.8 * bound);
}

TEST_CASE("orthogonal block init gives orthonormal columns", "[optim]") {
  Rng rng(313);
  auto t = Tensor<double>::zeros({8, 16});  // two 8x8 blocks
  fill_orthogonal_blocks(t, rng);
  for (int blk = 0; blk < 2; ++blk)
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        double dot = 0;
        for (int i = 0; i < 8; ++i)
          dot += t.at({i, blk * 8 + a}) * t.at({i, blk * 8 + b});
        REQUIRE(dot == Catch::Approx(a == b ? 1.0 : 0.0).margin(1e-12));
      }
  // The two blocks differ (fresh draws).
  double diff = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      diff += std::abs(t.at({i, j}) - t.at({i, 8 + j}));
  REQUIRE(diff > 1e-3);
}

TEST_CASE("seeded init reproduces bit-identically", "[optim]") {
  auto make = [] {
    Rng rng(777);
    auto a = Tensor<double>::zeros({4, 4});
    auto b = Tensor<double>::zeros({4, 8});
    fill_uniform_fan_in(a, 4, rng);
    fill_orthogonal_blocks(b, rng);
    std::vector<double> all = a.value();
    all.insert(all.end(), b.value().begin(), b.value().end());
    return all;
  };
  REQUIRE(make() == make());
}
