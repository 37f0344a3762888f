// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "rcunet/tensor.hpp"
#include "rcunet/tensor_ops.hpp"
#include "test_util.hpp"

using namespace rcunet;
using testutil::grad_check;
using testutil::random_tensor;

TEST_CASE("tensor construction and element access", "[tensor]") {
  auto t = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  REQUIRE(t.rank() == 2);
  REQUIRE(t.numel() == 6);
  REQUIRE(t.at({1, 2}) == 6.0);
  REQUIRE(t.at({0, 1}) == 2.0);
  REQUIRE_THROWS_AS(Tensor<double>::from({2, 2}, {1, 2, 3}), Error);
  auto z = Tensor<double>::zeros({4});
  REQUIRE(z.numel() == 4);
  REQUIRE(z.at({3}) == 0.0);
}

TEST_CASE("ops outside a tape do not track gradients", "[tensor]") {
  auto a = Tensor<double>::from({2}, {1, 2}).set_requires_grad(true);
  auto b = Tensor<double>::from({2}, {3, 4});
  auto c = add(a, b);
  REQUIRE_FALSE(c.requires_grad());
  REQUIRE(c.at({0}) == 4.0);
  REQUIRE(c.at({1}) == 6.0);
}

TEST_CASE("backward computes product-rule gradients", "[tensor]") {
  auto a = Tensor<double>::from({3}, {1, 2, 3}).set_requires_grad(true);
  auto b = Tensor<double>::from({3}, {4, 5, 6}).set_requires_grad(true);
  Tape<double> tape;
  auto loss = sum(add(mul(a, b), a));  // sum(a*b + a)
  tape.backward(loss);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(a.grad()[i] == Catch::Approx(b.at({i}) + 1.0));
    REQUIRE(b.grad()[i] == Catch::Approx(a.at({i})));
  }
}

TEST_CASE("a consumed tape rejects a second backward", "[tensor]") {
  auto a = Tensor<double>::from({2}, {1, 2}).set_requires_grad(true);
  Tape<double> tape;
  auto loss = sum(mul(a, a));
  tape.backward(loss);
  REQUIRE_THROWS_AS(tape.backward(loss), Error);
}

TEST_CASE("backward validates the loss tensor", "[tensor]") {
  auto a = Tensor<double>::from({2}, {1, 2}).set_requires_grad(true);
  SECTION("non-scalar loss") {
    Tape<double> tape;
    auto y = mul(a, a);
    REQUIRE_THROWS_AS(tape.backward(y), Error);
  }
  SECTION("loss without tracked inputs") {
    auto b = Tensor<double>::from({2}, {1, 2});
    Tape<double> tape;
    auto y = sum(mul(b, b));
    REQUIRE_THROWS_AS(tape.backward(y), Error);
  }
}

TEST_CASE("seeded backward scales gradients for accumulation", "[tensor]") {
  // Running the same loss twice with seed 0.5 must equal one unscaled pass:
  // the basis of averaging per-item gradients without building a batch graph.
  auto make = [] {
    return Tensor<double>::from({2}, {0.3, -0.7}).set_requires_grad(true);
  };
  auto a1 = make();
  {
    Tape<double> tape;
    auto loss = sum(mul(a1, a1));
    tape.backward(loss);
  }
  auto a2 = make();
  for (int pass = 0; pass < 2; ++pass) {
    Tape<double> tape;
    auto loss = sum(mul(a2, a2));
    tape.backward(loss, 0.5);
  }
  for (int i = 0; i < 2; ++i)
    REQUIRE(a2.grad()[i] == Catch::Approx(a1.grad()[i]));
}

TEST_CASE("gradients accumulate across tapes until cleared", "[tensor]") {
  auto a = Tensor<double>::from({2}, {1.5, -2.0}).set_requires_grad(true);
  for (int pass = 0; pass < 2; ++pass) {
    Tape<double> tape;
    auto loss = sum(mul(a, a));
    tape.backward(loss);
  }
  REQUIRE(a.grad()[0] == Catch::Approx(2.0 * 2.0 * 1.5));
  a.zero_grad();
  REQUIRE(a.grad()[0] == 0.0);
}

TEST_CASE("elementwise op values", "[tensor]") {
  auto x = Tensor<double>::from({3}, {-1.0, 0.0, 1.0});
  auto e = elu(x);
  REQUIRE(e.at({0}) == Catch::Approx(std::exp(-1.0) - 1.0));
  REQUIRE(e.at({1}) == 0.0);
  REQUIRE(e.at({2}) == 1.0);
  auto s = sigmoid(Tensor<double>::from({1}, {0.0}));
  REQUIRE(s.item() == Catch::Approx(0.5));
  auto t = rcunet::tanh(Tensor<double>::from({1}, {0.5}));
  REQUIRE(t.item() == Catch::Approx(std::tanh(0.5)));
  auto f = affine(x, 2.0, 1.0);
  REQUIRE(f.at({0}) == -1.0);
  REQUIRE(f.at({2}) == 3.0);
}

TEST_CASE("elementwise gradients match finite differences", "[tensor]") {
  Rng rng(7);
  auto x = random_tensor({4, 3}, rng);
  SECTION("sigmoid") {
    auto err = grad_check(
        [](std::vector<Tensor<double>>& in) { return sum(sigmoid(in[0])); },
        {x});
    REQUIRE(err < 1e-7);
  }
  SECTION("tanh") {
    auto err = grad_check(
        [](std::vector<Tensor<double>>& in) {
          return sum(rcunet::tanh(in[0]));
        },
        {x});
    REQUIRE(err < 1e-7);
  }
  SECTION("elu") {
    auto err = grad_check(
        [](std::vector<Tensor<double>>& in) { return sum(elu(in[0])); }, {x});
    REQUIRE(err < 1e-7);
  }
  SECTION("mul/add/sub mix") {
    auto y = random_tensor({4, 3}, rng);
    auto err = grad_check(
        [](std::vector<Tensor<double>>& in) {
          return mean(mul(sub(in[0], in[1]), add(in[0], in[1])));
        },
        {x, y});
    REQUIRE(err < 1e-7);
  }
}

TEST_CASE("matmul values and gradients", "[tensor]") {
  auto a = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor<double>::from({3, 2}, {7, 8, 9, 10, 11, 12});
  auto c = matmul(a, b);
  REQUIRE(c.at({0, 0}) == 58.0);
  REQUIRE(c.at({0, 1}) == 64.0);
  REQUIRE(c.at({1, 0}) == 139.0);
  REQUIRE(c.at({1, 1}) == 154.0);
  REQUIRE_THROWS_AS(matmul(a, a), Error);

  Rng rng(11);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(rcunet::tanh(matmul(in[0], in[1])));
      },
      {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
  REQUIRE(err < 1e-6);
}

TEST_CASE("add_rowvec broadcasts a bias row", "[tensor]") {
  auto m = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
  auto v = Tensor<double>::from({2}, {10, 20});
  auto r = add_rowvec(m, v);
  REQUIRE(r.at({0, 0}) == 11.0);
  REQUIRE(r.at({1, 1}) == 24.0);

  Rng rng(13);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(sigmoid(add_rowvec(in[0], in[1])));
      },
      {random_tensor({5, 3}, rng), random_tensor({3}, rng)});
  REQUIRE(err < 1e-7);
}

TEST_CASE("concat and slice on the feature axis", "[tensor]") {
  auto a = Tensor<double>::from({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto b = Tensor<double>::from({2, 2, 1}, {9, 10, 11, 12});
  auto c = concat_feat(a, b);
  REQUIRE(c.shape() == Shape{2, 2, 3});
  REQUIRE(c.at({0, 0, 2}) == 9.0);
  REQUIRE(c.at({1, 1, 0}) == 7.0);
  auto back = slice_feat(c, 0, 2);
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t j = 0; j < 2; ++j)
      for (std::int64_t k = 0; k < 2; ++k)
        REQUIRE(back.at({i, j, k}) == a.at({i, j, k}));

  Rng rng(17);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        auto c2 = concat_feat(in[0], in[1]);
        return sum(mul(c2, c2));
      },
      {random_tensor({2, 3, 2}, rng), random_tensor({2, 3, 4}, rng)});
  REQUIRE(err < 1e-7);

  auto err2 = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(rcunet::tanh(slice_feat(in[0], 1, 2)));
      },
      {random_tensor({2, 3, 4}, rng)});
  REQUIRE(err2 < 1e-7);
}

TEST_CASE("axis-0 and axis-1 slices", "[tensor]") {
  auto x = Tensor<double>::from({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto row = slice_axis0(x, 1);
  REQUIRE(row.shape() == Shape{2, 2});
  REQUIRE(row.at({0, 0}) == 5.0);
  auto mid = slice_axis1(x, 1, 1);
  REQUIRE(mid.shape() == Shape{2, 1, 2});
  REQUIRE(mid.at({1, 0, 1}) == 8.0);

  Rng rng(19);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(sigmoid(slice_axis0(in[0], 2)));
      },
      {random_tensor({4, 3, 2}, rng)});
  REQUIRE(err < 1e-7);
  auto err2 = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(sigmoid(slice_axis1(in[0], 1, 2)));
      },
      {random_tensor({3, 4, 2}, rng)});
  REQUIRE(err2 < 1e-7);
}

TEST_CASE("permute01 swaps leading axes", "[tensor]") {
  auto x = Tensor<double>::from({2, 3, 1}, {1, 2, 3, 4, 5, 6});
  auto p = permute01(x);
  REQUIRE(p.shape() == Shape{3, 2, 1});
  for (std::int64_t a = 0; a < 2; ++a)
    for (std::int64_t b = 0; b < 3; ++b)
      REQUIRE(p.at({b, a, 0}) == x.at({a, b, 0}));
  // An involution: permuting twice restores the original.
  auto pp = permute01(p);
  for (std::size_t i = 0; i < x.value().size(); ++i)
    REQUIRE(pp.value()[i] == x.value()[i]);

  Rng rng(23);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(rcunet::tanh(permute01(in[0])));
      },
      {random_tensor({3, 2, 4}, rng)});
  REQUIRE(err < 1e-7);
}

TEST_CASE("reductions and element picking", "[tensor]") {
  auto x = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
  REQUIRE(sum(x).item() == 10.0);
  REQUIRE(mean(x).item() == 2.5);
  REQUIRE(element(x, 2).item() == 3.0);

  Rng rng(29);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return element(mul(in[0], in[0]), 3);
      },
      {random_tensor({2, 3}, rng)});
  REQUIRE(err < 1e-7);
}

TEST_CASE("l1 loss value and subgradient", "[tensor]") {
  auto p = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
  auto t = Tensor<double>::from({2, 2}, {2, 2, 1, 8});
  REQUIRE(l1_loss(p, t).item() == Catch::Approx((1 + 0 + 2 + 4) / 4.0));

  Rng rng(31);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) { return l1_loss(in[0], in[1]); },
      {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  REQUIRE(err < 1e-6);
}

TEST_CASE("masked l1 sums agree with the unmasked oracle on valid rows",
          "[tensor]") {
  Rng rng(37);
  auto p = random_tensor({3, 5, 2}, rng);
  auto t = random_tensor({3, 5, 2}, rng);
  std::vector<double> mask = {1, 1, 0, 1, 0};

  // Oracle: sum |p-t| over the unmasked frames only, computed directly.
  double expect = 0.0;
  for (std::int64_t b = 0; b < 3; ++b)
    for (std::int64_t n = 0; n < 5; ++n)
      for (std::int64_t k = 0; k < 2; ++k)
        if (mask[static_cast<std::size_t>(n)] != 0.0)
          expect += std::abs(p.at({b, n, k}) - t.at({b, n, k}));
  REQUIRE(masked_l1_sum3(p, t, mask).item() == Catch::Approx(expect));

  // Gradient of masked frames is exactly zero; valid frames carry sign.
  p.set_requires_grad(true);
  {
    Tape<double> tape;
    auto loss = masked_l1_sum3(p, t, mask);
    tape.backward(loss);
  }
  for (std::int64_t b = 0; b < 3; ++b)
    for (std::int64_t n = 0; n < 5; ++n)
      for (std::int64_t k = 0; k < 2; ++k) {
        double g = p.grad()[static_cast<std::size_t>((b * 5 + n) * 2 + k)];
        if (mask[static_cast<std::size_t>(n)] == 0.0) {
          REQUIRE(g == 0.0);
        } else {
          double d = p.at({b, n, k}) - t.at({b, n, k});
          REQUIRE(g == (d > 0 ? 1.0 : -1.0));
        }
      }

  auto p2 = random_tensor({4, 3}, rng);
  auto t2 = random_tensor({4, 3}, rng);
  std::vector<double> rowmask = {0, 1, 1, 0};
  double expect2 = 0.0;
  for (std::int64_t r = 0; r < 4; ++r)
    for (std::int64_t c = 0; c < 3; ++c)
      if (rowmask[static_cast<std::size_t>(r)] != 0.0)
        expect2 += std::abs(p2.at({r, c}) - t2.at({r, c}));
  REQUIRE(masked_l1_sum2(p2, t2, rowmask).item() == Catch::Approx(expect2));
}
