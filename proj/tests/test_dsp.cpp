// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>
#include <cstdio>

#include "rcunet/dsp.hpp"
#include "rcunet/wav.hpp"
#include "test_util.hpp"

using namespace rcunet;

namespace {

// Quadratic-time reference transform.
std::vector<std::complex<double>> dft_ref(
    const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double ang = -2.0 * kPi * static_cast<double>(j * k) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> sine(double freq, int fs, int count, double amp = 1.0) {
  std::vector<double> x(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    x[static_cast<std::size_t>(i)] = amp * std::sin(2.0 * kPi * freq * i / fs);
  return x;
}

double rms(const std::vector<double>& x, std::size_t from, std::size_t to) {
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(to - from));
}

}  // namespace

TEST_CASE("fft matches the quadratic DFT oracle", "[dsp]") {
  Rng rng(401);
  for (std::size_t n : {16u, 128u, 512u}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto want = dft_ref(x);
    auto got = x;
    fft_inplace(got, false);
    for (std::size_t k = 0; k < n; ++k)
      REQUIRE(std::abs(got[k] - want[k]) < 1e-9);
    fft_inplace(got, true);
    for (std::size_t k = 0; k < n; ++k)
      REQUIRE(std::abs(got[k] - x[k]) < 1e-12);
  }
  std::vector<std::complex<double>> bad(12);
  REQUIRE_THROWS_AS(fft_inplace(bad, false), Error);
}

TEST_CASE("rfft and irfft invert each other", "[dsp]") {
  Rng rng(403);
  std::vector<double> x(200);
  for (auto& v : x) v = rng.uniform(-1, 1);
  auto half = rfft(x.data(), x.size(), 512);
  REQUIRE(half.size() == 257);
  auto back = irfft(half, 512);
  for (std::size_t i = 0; i < 200; ++i)
    REQUIRE(back[i] == Catch::Approx(x[i]).margin(1e-12));
  for (std::size_t i = 200; i < 512; ++i)
    REQUIRE(std::abs(back[i]) < 1e-12);
}

TEST_CASE("frame count follows 1 + floor((len-200)/80)", "[dsp]") {
  REQUIRE(num_frames(8000) == 98);
  REQUIRE(num_frames(200) == 1);
  REQUIRE(num_frames(279) == 1);
  REQUIRE(num_frames(280) == 2);
  REQUIRE(num_frames(199) == 0);
  REQUIRE(num_frames(0) == 0);
}

TEST_CASE("periodic hann window endpoints and symmetry", "[dsp]") {
  auto w = hann_periodic(200);
  REQUIRE(w[0] == 0.0);
  REQUIRE(w[100] == Catch::Approx(1.0));
  for (int k = 1; k < 200; ++k)
    REQUIRE(w[static_cast<std::size_t>(k)] ==
            Catch::Approx(w[static_cast<std::size_t>(200 - k)]).margin(1e-15));
}

TEST_CASE("stft shape and istft exact reconstruction", "[dsp]") {
  Rng rng(405);
  std::vector<double> x(8000);
  for (auto& v : x) v = rng.uniform(-0.9, 0.9);
  auto spec = stft(x);
  REQUIRE(spec.rows() == 257);
  REQUIRE(spec.cols() == 98);

  auto y = istft(spec, static_cast<std::int64_t>(x.size()));
  REQUIRE(y.size() == x.size());
  // Least-squares overlap-add is exact wherever the window covers; the very
  // first sample has zero window weight and the last partial hop is beyond
  // the final frame.
  const std::size_t cover = 97 * 80 + 200;
  double worst = 0.0;
  for (std::size_t i = 1; i < cover; ++i)
    worst = std::max(worst, std::abs(y[i] - x[i]));
  REQUIRE(worst < 1e-10);
  REQUIRE(y[0] == 0.0);
  for (std::size_t i = cover; i < y.size(); ++i) REQUIRE(y[i] == 0.0);

  REQUIRE_THROWS_AS(stft(std::vector<double>(100, 0.0)), Error);
}

TEST_CASE("mel scale anchors", "[dsp]") {
  REQUIRE(hz_to_mel(0.0) == 0.0);
  REQUIRE(hz_to_mel(700.0) == Catch::Approx(2595.0 * std::log10(2.0)));
  REQUIRE(mel_to_hz(hz_to_mel(1234.5)) == Catch::Approx(1234.5));
}

TEST_CASE("mel bank triangles cover the band and invert consistently",
          "[dsp]") {
  auto bank = make_mel_bank();
  REQUIRE(bank.weights.rows() == 64);
  REQUIRE(bank.weights.cols() == 257);

  // Every filter has mass, weights are non-negative, and interior bins are
  // covered by at least one filter.
  for (int b = 0; b < 64; ++b) REQUIRE(bank.weights.row(b).sum() > 0.0);
  REQUIRE(bank.weights.minCoeff() >= 0.0);
  const double lo_center = mel_to_hz(hz_to_mel(4000.0) / 65.0);
  const double hi_center = mel_to_hz(hz_to_mel(4000.0) * 64.0 / 65.0);
  for (int k = 0; k < 257; ++k) {
    const double f = k * 8000.0 / 512.0;
    if (f > lo_center && f < hi_center)
      REQUIRE(bank.weights.col(k).sum() > 0.0);
  }

  // W pinv = I on the 64-dimensional mel space.
  Eigen::MatrixXd eye = bank.weights * bank.inverse;
  REQUIRE((eye - Eigen::MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() <
          1e-8);
  // pinv W projects onto the row space: W pinv W = W.
  Eigen::MatrixXd reproj = bank.weights * bank.inverse * bank.weights;
  REQUIRE((reproj - bank.weights).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("logmel floors at ln(1e-7) and inverts row-space spectra", "[dsp]") {
  auto bank = make_mel_bank();
  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(257, 3);
  auto lm = logmel_from_mag(zeros, bank);
  REQUIRE(lm.rows() == 64);
  REQUIRE(lm.cols() == 3);
  for (int b = 0; b < 64; ++b)
    for (int f = 0; f < 3; ++f)
      REQUIRE(lm(b, f) == Catch::Approx(std::log(1e-7)));

  // A magnitude already in the filterbank row space round-trips through
  // logmel -> mag exactly (up to the solver tolerance).
  Rng rng(407);
  Eigen::MatrixXd mel_amp(64, 2);
  for (int b = 0; b < 64; ++b)
    for (int f = 0; f < 2; ++f) mel_amp(b, f) = rng.uniform(0.5, 2.0);
  Eigen::MatrixXd mag = bank.weights.transpose() * mel_amp;
  auto rec = mag_from_logmel(logmel_from_mag(mag, bank), bank);
  REQUIRE((rec - mag).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("resample is identity at equal rates", "[dsp]") {
  Rng rng(409);
  std::vector<double> x(500);
  for (auto& v : x) v = rng.uniform(-1, 1);
  auto y = resample(x, 8000, 8000);
  REQUIRE(y == x);
}

TEST_CASE("resample preserves a 1 kHz tone from 8 kHz to 10 kHz", "[dsp]") {
  auto x = sine(1000.0, 8000, 8000);
  auto y = resample(x, 8000, 10000);
  REQUIRE(y.size() == 10000);
  double worst = 0.0;
  for (std::size_t j = 1000; j < 9000; ++j) {
    double want = std::sin(2.0 * kPi * 1000.0 * static_cast<double>(j) / 10000.0);
    worst = std::max(worst, std::abs(y[j] - want));
  }
  REQUIRE(worst < 0.01);
}

TEST_CASE("a 3.9 kHz tone survives 16 kHz to 8 kHz within 1 dB", "[dsp]") {
  auto x = sine(3900.0, 16000, 16000);
  auto y = resample(x, 16000, 8000);
  REQUIRE(y.size() == 8000);
  const double level = rms(y, 1000, 7000) * std::sqrt(2.0);
  const double db = 20.0 * std::log10(level);
  REQUIRE(db > -1.0);
  REQUIRE(db < 0.5);
}

TEST_CASE("resample rejects out-of-band energy", "[dsp]") {
  // 5 kHz cannot be represented at 8 kHz; it must not alias in.
  auto x = sine(5000.0, 16000, 16000);
  auto y = resample(x, 16000, 8000);
  REQUIRE(rms(y, 1000, 7000) < 1e-3 * rms(x, 1000, 7000));
}

TEST_CASE("wav files round-trip 16-bit samples exactly", "[dsp]") {
  Waveform w;
  w.sample_rate = 8000;
  Rng rng(411);
  w.samples.resize(1000);
  for (auto& s : w.samples)
    s = std::round(rng.uniform(-0.99, 0.99) * 32768.0) / 32768.0;
  const std::string path = "tmp_roundtrip_test.wav";
  write_wav(path, w);
  auto r = read_wav(path);
  REQUIRE(r.sample_rate == 8000);
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    REQUIRE(r.samples[i] == w.samples[i]);
  std::remove(path.c_str());

  REQUIRE_THROWS_AS(read_wav("definitely_missing_file.wav"), Error);
}

TEST_CASE("mel pseudoinverse residual is tiny in the Frobenius norm", "[dsp]") {
  auto bank = make_mel_bank();
  Eigen::MatrixXd resid =
      bank.weights * bank.inverse * bank.weights - bank.weights;
  REQUIRE(resid.norm() / bank.weights.norm() < 1e-10);

  // Exact on the row space: v = W^T u recovers after pinv projection.
  Rng rng(431);
  Eigen::VectorXd u(64);
  for (int b = 0; b < 64; ++b) u(b) = rng.uniform(-1.0, 1.0);
  Eigen::VectorXd v = bank.weights.transpose() * u;
  Eigen::VectorXd back = bank.inverse * (bank.weights * v);
  REQUIRE((back - v).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("features floors silence and shifts by ln 2 under doubling",
          "[dsp]") {
  auto bank = make_mel_bank();
  Waveform silent;
  silent.samples.assign(1000, 0.0);
  auto fs = features(silent, bank);
  REQUIRE(fs.logmel.rows() == 64);
  REQUIRE(fs.frames() == 11);
  REQUIRE((fs.logmel.array() == std::log(1e-7)).all());
  REQUIRE((fs.phase.array() == 0.0).all());

  Rng rng(433);
  Waveform x;
  x.samples.resize(2000);
  for (auto& v : x.samples) v = 0.3 * rng.uniform(-1.0, 1.0);
  Waveform x2 = x;
  for (auto& v : x2.samples) v *= 2.0;
  auto fa = features(x, bank);
  auto fb = features(x2, bank);
  for (int b = 0; b < 64; ++b)
    for (int f = 0; f < fa.frames(); ++f)
      if (fa.logmel(b, f) > std::log(1e-7) + 1e-6)
        REQUIRE(fb.logmel(b, f) - fa.logmel(b, f) ==
                Catch::Approx(std::log(2.0)).margin(1e-9));

  Waveform wrong_rate = x;
  wrong_rate.sample_rate = 16000;
  REQUIRE_THROWS_AS(features(wrong_rate, bank), Error);
}

TEST_CASE("features matches the chained stft-mel-log oracle", "[dsp]") {
  auto bank = make_mel_bank();
  Rng rng(437);
  Waveform x;
  x.samples.resize(1600);
  for (auto& v : x.samples) v = rng.uniform(-0.5, 0.5);
  auto got = features(x, bank);

  Eigen::MatrixXcd spec = stft(x.samples);
  Eigen::MatrixXd want =
      (bank.weights * spec.cwiseAbs()).array().max(1e-7).log().matrix();
  REQUIRE((got.logmel - want).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((got.phase - spec.array().arg().matrix()).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("features then reconstruct round-trips band-limited noise", "[dsp]") {
  // A dense tone comb confined to the well-covered mel range stands in for
  // speech-band noise; mel compression is lossy so the bound is loose.
  Rng rng(439);
  Waveform x;
  x.sample_rate = 8000;
  x.samples.assign(8000, 0.0);
  const int tones = 60;
  for (int t = 0; t < tones; ++t) {
    const double f = rng.uniform(150.0, 3400.0);
    const double ph = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < x.samples.size(); ++i)
      x.samples[i] +=
          std::sin(2.0 * kPi * f * static_cast<double>(i) / 8000.0 + ph) /
          std::sqrt(static_cast<double>(tones));
  }
  auto bank = make_mel_bank();
  auto sp = features(x, bank);
  auto y = reconstruct(sp.logmel, sp.phase, bank,
                       static_cast<std::int64_t>(x.samples.size()));
  REQUIRE(y.samples.size() == x.samples.size());
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 200; i + 200 < x.samples.size(); ++i) {
    err += (y.samples[i] - x.samples[i]) * (y.samples[i] - x.samples[i]);
    ref += x.samples[i] * x.samples[i];
  }
  REQUIRE(std::sqrt(err / ref) < 0.15);
}

TEST_CASE("reconstruct silences floor input and rejects frame mismatch",
          "[dsp]") {
  auto bank = make_mel_bank();
  Eigen::MatrixXd lm = Eigen::MatrixXd::Constant(64, 5, std::log(1e-7));
  Eigen::MatrixXd ph = Eigen::MatrixXd::Zero(257, 5);
  auto y = reconstruct(lm, ph, bank);
  REQUIRE(y.samples.size() == static_cast<std::size_t>(4 * 80 + 200));
  double sq = 0.0;
  for (double v : y.samples) sq += v * v;
  REQUIRE(std::sqrt(sq / static_cast<double>(y.samples.size())) < 1e-5);

  REQUIRE_THROWS_AS(reconstruct(lm, Eigen::MatrixXd::Zero(257, 4), bank),
                    Error);
  REQUIRE_THROWS_AS(reconstruct(lm, Eigen::MatrixXd::Zero(256, 5), bank),
                    Error);
}

TEST_CASE("zero phase gives an even inverse frame", "[dsp]") {
  auto bank = make_mel_bank();
  Eigen::MatrixXd lm = Eigen::MatrixXd::Constant(64, 1, std::log(0.5));
  Eigen::MatrixXd ph = Eigen::MatrixXd::Zero(257, 1);
  Eigen::MatrixXd mag = mag_from_logmel(lm, bank);

  // Real (zero-phase) spectrum -> circularly even time frame.
  std::vector<std::complex<double>> half(257);
  for (int k = 0; k < 257; ++k) half[static_cast<std::size_t>(k)] = mag(k, 0);
  auto seg = irfft(half, 512);
  for (std::size_t i = 1; i < 512; ++i)
    REQUIRE(seg[i] == Catch::Approx(seg[512 - i]).margin(1e-12));

  // reconstruct applies the same inverse frame through the OLA normalizer.
  auto y = reconstruct(lm, ph, bank, 200);
  auto win = hann_periodic(200);
  for (std::size_t i = 1; i < 200; ++i)
    REQUIRE(y.samples[i] * win[i] == Catch::Approx(seg[i]).margin(1e-12));
}
