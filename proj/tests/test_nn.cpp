// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "rcunet/nn.hpp"
#include "test_util.hpp"

using namespace rcunet;
using testutil::grad_check;
using testutil::random_tensor;

namespace {

// Direct convolution oracle: four nested loops, zero padding.
Tensor<double> conv_ref(const Tensor<double>& x, const Tensor<double>& k,
                        const Tensor<double>& bias) {
  const std::int64_t B = x.dim(0), N = x.dim(1), Ci = x.dim(2);
  const int ks = static_cast<int>(k.dim(0));
  const std::int64_t Co = k.dim(3);
  const int pad = ks / 2;
  auto out = Tensor<double>::zeros({B, N, Co});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t co = 0; co < Co; ++co) {
        double acc = bias.at({co});
        for (int db = 0; db < ks; ++db)
          for (int dn = 0; dn < ks; ++dn) {
            std::int64_t ib = b + db - pad, in = n + dn - pad;
            if (ib < 0 || ib >= B || in < 0 || in >= N) continue;
            for (std::int64_t ci = 0; ci < Ci; ++ci)
              acc += x.at({ib, in, ci}) * k.at({db, dn, ci, co});
          }
        out.value()[static_cast<std::size_t>((b * N + n) * Co + co)] = acc;
      }
  return out;
}

// Transposed convolution oracle built literally: zero-stuff the input, run a
// full 6x6 correlation, crop two samples from every border.
Tensor<double> tconv_ref(const Tensor<double>& x, const Tensor<double>& k,
                         const Tensor<double>& bias) {
  const std::int64_t B = x.dim(0), N = x.dim(1), Ci = x.dim(2);
  const std::int64_t Co = k.dim(3);
  const std::int64_t Bu = 2 * B - 1, Nu = 2 * N - 1;
  std::vector<double> u(static_cast<std::size_t>(Bu * Nu * Ci), 0.0);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < Ci; ++c)
        u[static_cast<std::size_t>(((2 * b) * Nu + 2 * n) * Ci + c)] =
            x.at({b, n, c});
  auto uat = [&](std::int64_t b, std::int64_t n, std::int64_t c) {
    if (b < 0 || b >= Bu || n < 0 || n >= Nu) return 0.0;
    return u[static_cast<std::size_t>((b * Nu + n) * Ci + c)];
  };
  auto out = Tensor<double>::zeros({2 * B, 2 * N, Co});
  for (std::int64_t jb = 0; jb < 2 * B; ++jb)
    for (std::int64_t jn = 0; jn < 2 * N; ++jn)
      for (std::int64_t co = 0; co < Co; ++co) {
        double acc = bias.at({co});
        for (int db = 0; db < 6; ++db)
          for (int dn = 0; dn < 6; ++dn)
            for (std::int64_t ci = 0; ci < Ci; ++ci)
              acc += uat(jb - 3 + db, jn - 3 + dn, ci) * k.at({db, dn, ci, co});
        out.value()[static_cast<std::size_t>((jb * 2 * N + jn) * Co + co)] =
            acc;
      }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches the direct-sum oracle", "[nn]") {
  Rng rng(101);
  for (int ks : {1, 3}) {
    auto x = random_tensor({5, 7, 3}, rng);
    auto k = random_tensor({ks, ks, 3, 4}, rng);
    auto b = random_tensor({4}, rng);
    auto got = conv2d(x, k, b);
    auto want = conv_ref(x, k, b);
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < want.value().size(); ++i)
      REQUIRE(got.value()[i] == Catch::Approx(want.value()[i]).margin(1e-12));
  }
}

TEST_CASE("conv2d counts neighbors for an all-ones kernel", "[nn]") {
  // Constant-1 input, 3x3 all-ones kernel, zero bias: each output equals the
  // number of in-bounds taps, so corners 4, edges 6, interior 9.
  auto x = Tensor<double>::full({3, 3, 1}, 1.0);
  auto k = Tensor<double>::full({3, 3, 1, 1}, 1.0);
  auto b = Tensor<double>::zeros({1});
  auto y = conv2d(x, k, b);
  REQUIRE(y.at({0, 0, 0}) == 4.0);
  REQUIRE(y.at({0, 1, 0}) == 6.0);
  REQUIRE(y.at({1, 0, 0}) == 6.0);
  REQUIRE(y.at({1, 1, 0}) == 9.0);
  REQUIRE(y.at({2, 2, 0}) == 4.0);
}

TEST_CASE("conv2d rejects mismatched shapes", "[nn]") {
  Rng rng(5);
  auto x = random_tensor({4, 4, 2}, rng);
  REQUIRE_THROWS_AS(
      conv2d(x, random_tensor({3, 3, 3, 4}, rng), random_tensor({4}, rng)),
      Error);
  REQUIRE_THROWS_AS(
      conv2d(x, random_tensor({3, 3, 2, 4}, rng), random_tensor({5}, rng)),
      Error);
}

TEST_CASE("conv2d gradients match finite differences", "[nn]") {
  Rng rng(103);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(rcunet::tanh(conv2d(in[0], in[1], in[2])));
      },
      {random_tensor({4, 5, 2}, rng), random_tensor({3, 3, 2, 3}, rng),
       random_tensor({3}, rng)});
  REQUIRE(err < 1e-6);
  auto err1 = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(rcunet::tanh(conv2d(in[0], in[1], in[2])));
      },
      {random_tensor({3, 4, 3}, rng), random_tensor({1, 1, 3, 2}, rng),
       random_tensor({2}, rng)});
  REQUIRE(err1 < 1e-6);
}

TEST_CASE("conv_transpose2d doubles both spatial extents", "[nn]") {
  Rng rng(107);
  auto x = random_tensor({4, 7, 3}, rng);
  auto k = random_tensor({6, 6, 3, 2}, rng);
  auto b = random_tensor({2}, rng);
  auto y = conv_transpose2d(x, k, b);
  REQUIRE(y.shape() == Shape{8, 14, 2});
}

TEST_CASE("conv_transpose2d matches zero-stuff + full correlation + crop",
          "[nn]") {
  Rng rng(109);
  auto x = random_tensor({3, 2, 2}, rng);
  auto k = random_tensor({6, 6, 2, 2}, rng);
  auto b = random_tensor({2}, rng);
  auto got = conv_transpose2d(x, k, b);
  auto want = tconv_ref(x, k, b);
  REQUIRE(got.shape() == want.shape());
  for (std::size_t i = 0; i < want.value().size(); ++i)
    REQUIRE(got.value()[i] == Catch::Approx(want.value()[i]).margin(1e-12));
}

TEST_CASE("conv_transpose2d single-pixel input places flipped taps", "[nn]") {
  // One spatial sample v: out[j_b, j_n] = v * k[3-j_b, 3-j_n] for the four
  // output positions of the doubled 2x2 canvas.
  const double v = 1.75;
  auto x = Tensor<double>::full({1, 1, 1}, v);
  Rng rng(113);
  auto k = random_tensor({6, 6, 1, 1}, rng);
  auto b = Tensor<double>::zeros({1});
  auto y = conv_transpose2d(x, k, b);
  REQUIRE(y.shape() == Shape{2, 2, 1});
  for (std::int64_t jb = 0; jb < 2; ++jb)
    for (std::int64_t jn = 0; jn < 2; ++jn)
      REQUIRE(y.at({jb, jn, 0}) ==
              Catch::Approx(v * k.at({3 - jb, 3 - jn, 0, 0})));
}

TEST_CASE("conv_transpose2d gradients match finite differences", "[nn]") {
  Rng rng(127);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(rcunet::tanh(conv_transpose2d(in[0], in[1], in[2])));
      },
      {random_tensor({3, 2, 2}, rng), random_tensor({6, 6, 2, 2}, rng),
       random_tensor({2}, rng)});
  REQUIRE(err < 1e-6);
}

TEST_CASE("maxpool2x2 takes ceil shapes with implicit -inf padding", "[nn]") {
  auto x = Tensor<double>::from(
      {3, 5, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
  auto y = maxpool2x2(x);
  REQUIRE(y.shape() == Shape{2, 3, 1});
  REQUIRE(y.at({0, 0, 0}) == 7.0);   // max of {1,2,6,7}
  REQUIRE(y.at({0, 2, 0}) == 10.0);  // max of {5,10}, column clipped
  REQUIRE(y.at({1, 0, 0}) == 12.0);  // max of {11,12}, row clipped
  REQUIRE(y.at({1, 2, 0}) == 15.0);  // single surviving corner
}

TEST_CASE("maxpool2x2 routes gradient to the first of tied elements", "[nn]") {
  auto x = Tensor<double>::full({2, 2, 1}, 3.0).set_requires_grad(true);
  {
    Tape<double> tape;
    auto y = maxpool2x2(x);
    auto loss = sum(y);
    tape.backward(loss);
  }
  REQUIRE(x.grad()[0] == 1.0);
  REQUIRE(x.grad()[1] == 0.0);
  REQUIRE(x.grad()[2] == 0.0);
  REQUIRE(x.grad()[3] == 0.0);
}

TEST_CASE("maxpool2x2 gradients match finite differences", "[nn]") {
  // Widely separated values keep the argmax stable under the probe step.
  std::vector<double> vals(5 * 4 * 2);
  Rng rng(131);
  std::vector<std::size_t> order(vals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t i = 0; i < vals.size(); ++i)
    vals[order[i]] = static_cast<double>(i) * 0.37;
  auto x = Tensor<double>::from({5, 4, 2}, vals);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(rcunet::tanh(maxpool2x2(in[0])));
      },
      {x});
  REQUIRE(err < 1e-6);
}

TEST_CASE("batchnorm train normalizes per feature and tracks running stats",
          "[nn]") {
  Rng rng(137);
  auto x = random_tensor({6, 5, 3}, rng, -2.0, 5.0);
  auto gamma = Tensor<double>::full({3}, 1.0);
  auto beta = Tensor<double>::zeros({3});
  BnState<double> st;
  st.init(3);
  auto y = batchnorm(x, gamma, beta, st, BnMode::train);

  const std::int64_t m = 6 * 5;
  for (std::int64_t k = 0; k < 3; ++k) {
    double mean = 0, var = 0;
    for (std::int64_t r = 0; r < m; ++r) mean += y.value()[r * 3 + k];
    mean /= m;
    for (std::int64_t r = 0; r < m; ++r) {
      double d = y.value()[r * 3 + k] - mean;
      var += d * d;
    }
    var /= m;
    REQUIRE(mean == Catch::Approx(0.0).margin(1e-10));
    REQUIRE(var == Catch::Approx(1.0).epsilon(1e-3));  // eps shrinks it a bit

    // Running stats moved 1% of the way from the defaults to batch stats.
    double bmean = 0, bvar = 0;
    for (std::int64_t r = 0; r < m; ++r) bmean += x.value()[r * 3 + k];
    bmean /= m;
    for (std::int64_t r = 0; r < m; ++r) {
      double d = x.value()[r * 3 + k] - bmean;
      bvar += d * d;
    }
    bvar /= m;
    REQUIRE(st.run_mean[static_cast<std::size_t>(k)] ==
            Catch::Approx(0.01 * bmean).margin(1e-12));
    REQUIRE(st.run_var[static_cast<std::size_t>(k)] ==
            Catch::Approx(0.99 + 0.01 * bvar).margin(1e-12));
  }
  REQUIRE(st.updates == 1);

  // Scale and shift apply after normalization.
  auto g2 = Tensor<double>::from({3}, {2.0, 2.0, 2.0});
  auto b2 = Tensor<double>::from({3}, {1.0, 1.0, 1.0});
  BnState<double> st2;
  st2.init(3);
  auto y2 = batchnorm(x, g2, b2, st2, BnMode::train);
  for (std::size_t i = 0; i < y.value().size(); ++i)
    REQUIRE(y2.value()[i] == Catch::Approx(2.0 * y.value()[i] + 1.0));
}

TEST_CASE("batchnorm eval uses running statistics", "[nn]") {
  Rng rng(139);
  auto gamma = Tensor<double>::full({2}, 1.0);
  auto beta = Tensor<double>::zeros({2});
  BnState<double> st;
  st.init(2);
  // Feed several training batches, then check eval against the stored stats.
  for (int i = 0; i < 3; ++i) {
    auto xb = random_tensor({4, 4, 2}, rng, -1.0, 3.0);
    batchnorm(xb, gamma, beta, st, BnMode::train);
  }
  auto x = random_tensor({2, 3, 2}, rng);
  auto y = batchnorm(x, gamma, beta, st, BnMode::eval);
  for (std::int64_t r = 0; r < 6; ++r)
    for (std::int64_t k = 0; k < 2; ++k) {
      auto ks = static_cast<std::size_t>(k);
      double want = (x.value()[r * 2 + k] - st.run_mean[ks]) /
                    std::sqrt(st.run_var[ks] + 1e-5);
      REQUIRE(y.value()[r * 2 + k] == Catch::Approx(want));
    }
}

TEST_CASE("batchnorm eval before any update falls back to defaults", "[nn]") {
  Rng rng(149);
  auto x = random_tensor({3, 3, 2}, rng);
  auto gamma = Tensor<double>::full({2}, 1.0);
  auto beta = Tensor<double>::zeros({2});
  BnState<double> st;
  st.init(2);
  auto y = batchnorm(x, gamma, beta, st, BnMode::eval);
  REQUIRE(st.warned);  // the warning fires once
  for (std::size_t i = 0; i < x.value().size(); ++i)
    REQUIRE(y.value()[i] ==
            Catch::Approx(x.value()[i] / std::sqrt(1.0 + 1e-5)));
}

TEST_CASE("batchnorm rejects single-element train batches", "[nn]") {
  auto x = Tensor<double>::from({1, 1, 2}, {1.0, 2.0});
  auto gamma = Tensor<double>::full({2}, 1.0);
  auto beta = Tensor<double>::zeros({2});
  BnState<double> st;
  st.init(2);
  REQUIRE_THROWS_AS(batchnorm(x, gamma, beta, st, BnMode::train), Error);
}

TEST_CASE("batchnorm gradients match finite differences", "[nn]") {
  Rng rng(151);
  SECTION("train mode") {
    auto err = grad_check(
        [](std::vector<Tensor<double>>& in) {
          BnState<double> st;
          st.init(2);
          return sum(
              rcunet::tanh(batchnorm(in[0], in[1], in[2], st, BnMode::train)));
        },
        {random_tensor({4, 3, 2}, rng), random_tensor({2}, rng, 0.5, 1.5),
         random_tensor({2}, rng)});
    REQUIRE(err < 1e-6);
  }
  SECTION("eval mode") {
    auto err = grad_check(
        [](std::vector<Tensor<double>>& in) {
          BnState<double> st;
          st.init(2);
          st.run_mean = {0.3, -0.2};
          st.run_var = {1.7, 0.6};
          st.updates = 5;
          return sum(
              rcunet::tanh(batchnorm(in[0], in[1], in[2], st, BnMode::eval)));
        },
        {random_tensor({4, 3, 2}, rng), random_tensor({2}, rng, 0.5, 1.5),
         random_tensor({2}, rng)});
    REQUIRE(err < 1e-6);
  }
}

TEST_CASE("pad_frames_reflect mirrors without repeating the edge", "[nn]") {
  auto x = Tensor<double>::from({1, 4, 1}, {10, 20, 30, 40});
  auto y = pad_frames_reflect(x, 2, 3);
  REQUIRE(y.shape() == Shape{1, 9, 1});
  std::vector<double> want = {30, 20, 10, 20, 30, 40, 30, 20, 10};
  for (std::size_t i = 0; i < want.size(); ++i)
    REQUIRE(y.value()[i] == want[i]);

  // Pads longer than the signal keep bouncing.
  auto s = Tensor<double>::from({1, 2, 1}, {1, 2});
  auto ys = pad_frames_reflect(s, 0, 4);
  std::vector<double> wants = {1, 2, 1, 2, 1, 2};
  for (std::size_t i = 0; i < wants.size(); ++i)
    REQUIRE(ys.value()[i] == wants[i]);

  Rng rng(157);
  auto err = grad_check(
      [](std::vector<Tensor<double>>& in) {
        return sum(rcunet::tanh(pad_frames_reflect(in[0], 1, 3)));
      },
      {random_tensor({2, 5, 2}, rng)});
  REQUIRE(err < 1e-6);
}
