// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <numeric>
#include <vector>

#include "rcunet/fft.hpp"
#include "rcunet/wav.hpp"

namespace rcunet {

// Analysis constants for 8 kHz audio: 25 ms frames, 10 ms hop, 512-point
// transform.
constexpr int kSampleRate = 8000;
constexpr int kFrameLen = 200;
constexpr int kHopLen = 80;
constexpr int kFftSize = 512;
constexpr int kNumBins = kFftSize / 2 + 1;  // 257
constexpr int kMelBands = 64;
constexpr double kLogFloor = 1e-7;

inline std::int64_t num_frames(std::int64_t samples) {
  return samples < kFrameLen ? 0 : 1 + (samples - kFrameLen) / kHopLen;
}

// Periodic Hann window: w[n] = 0.5 - 0.5 cos(2 pi n / len).
inline std::vector<double> hann_periodic(int len) {
  std::vector<double> w(static_cast<std::size_t>(len));
  for (int n = 0; n < len; ++n)
    w[static_cast<std::size_t>(n)] =
        0.5 - 0.5 * std::cos(2.0 * kPi * n / static_cast<double>(len));
  return w;
}

// Short-time transform. Columns are frames, rows the 257 bins.
inline Eigen::MatrixXcd stft(const std::vector<double>& x) {
  const std::int64_t n = num_frames(static_cast<std::int64_t>(x.size()));
  check(n > 0, cat("stft: signal too short (", x.size(), " samples, need >= ",
                   kFrameLen, ")"));
  static const std::vector<double> win = hann_periodic(kFrameLen);
  Eigen::MatrixXcd spec(kNumBins, n);
  std::vector<double> frame(static_cast<std::size_t>(kFrameLen));
  for (std::int64_t f = 0; f < n; ++f) {
    const double* src = x.data() + f * kHopLen;
    for (int i = 0; i < kFrameLen; ++i)
      frame[static_cast<std::size_t>(i)] = src[i] * win[static_cast<std::size_t>(i)];
    auto bins = rfft(frame.data(), frame.size(), kFftSize);
    for (int k = 0; k < kNumBins; ++k) spec(k, f) = bins[static_cast<std::size_t>(k)];
  }
  return spec;
}

// Least-squares overlap-add inverse: y = sum_f w . seg_f / sum_f w^2. For an
// unmodified spectrum this is an exact identity on every sample with nonzero
// window coverage (the very first sample has w[0] = 0 and reconstructs as 0).
inline std::vector<double> istft(const Eigen::MatrixXcd& spec,
                                 std::int64_t out_len) {
  check(spec.rows() == kNumBins, "istft: expected 257 bins per frame");
  const std::int64_t n = spec.cols();
  static const std::vector<double> win = hann_periodic(kFrameLen);
  const std::int64_t cover = n == 0 ? 0 : (n - 1) * kHopLen + kFrameLen;
  std::vector<double> num(static_cast<std::size_t>(cover), 0.0);
  std::vector<double> den(static_cast<std::size_t>(cover), 0.0);
  std::vector<std::complex<double>> half(static_cast<std::size_t>(kNumBins));
  for (std::int64_t f = 0; f < n; ++f) {
    for (int k = 0; k < kNumBins; ++k)
      half[static_cast<std::size_t>(k)] = spec(k, f);
    auto seg = irfft(half, kFftSize);
    const std::int64_t t0 = f * kHopLen;
    for (int i = 0; i < kFrameLen; ++i) {
      const double w = win[static_cast<std::size_t>(i)];
      num[static_cast<std::size_t>(t0 + i)] += w * seg[static_cast<std::size_t>(i)];
      den[static_cast<std::size_t>(t0 + i)] += w * w;
    }
  }
  std::vector<double> y(static_cast<std::size_t>(out_len), 0.0);
  const std::int64_t upto = std::min(out_len, cover);
  for (std::int64_t i = 0; i < upto; ++i)
    y[static_cast<std::size_t>(i)] =
        den[static_cast<std::size_t>(i)] > 1e-12
            ? num[static_cast<std::size_t>(i)] / den[static_cast<std::size_t>(i)]
            : 0.0;
  return y;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// 64 triangular filters equally spaced on the mel scale from 0 Hz to the
// 4 kHz Nyquist, sampled at the FFT bin centers, plus the least-squares
// inverse map pinv = W^T (W W^T)^{-1}.
struct MelBank {
  Eigen::MatrixXd weights;  // [64, 257]
  Eigen::MatrixXd inverse;  // [257, 64]
};

inline MelBank make_mel_bank() {
  MelBank bank;
  bank.weights = Eigen::MatrixXd::Zero(kMelBands, kNumBins);
  const double mel_max = hz_to_mel(kSampleRate / 2.0);
  std::vector<double> pts(kMelBands + 2);
  for (int j = 0; j < kMelBands + 2; ++j)
    pts[static_cast<std::size_t>(j)] =
        mel_max * static_cast<double>(j) / static_cast<double>(kMelBands + 1);
  for (int k = 0; k < kNumBins; ++k) {
    const double mel = hz_to_mel(static_cast<double>(k) * kSampleRate / kFftSize);
    for (int b = 0; b < kMelBands; ++b) {
      const double left = pts[static_cast<std::size_t>(b)];
      const double center = pts[static_cast<std::size_t>(b + 1)];
      const double right = pts[static_cast<std::size_t>(b + 2)];
      double w = 0.0;
      if (mel > left && mel < right)
        w = mel <= center ? (mel - left) / (center - left)
                          : (right - mel) / (right - center);
      bank.weights(b, k) = w;
    }
  }
  // W has full row rank, so W W^T is positive definite and LDLT applies.
  Eigen::MatrixXd gram = bank.weights * bank.weights.transpose();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  check(ldlt.info() == Eigen::Success, "mel bank: gram factorization failed");
  bank.inverse = ldlt.solve(bank.weights).transpose();
  return bank;
}

// ln(max(W |S|, floor)) applied to a [257, frames] magnitude array.
inline Eigen::MatrixXd logmel_from_mag(const Eigen::MatrixXd& mag,
                                       const MelBank& bank) {
  check(mag.rows() == kNumBins, "logmel_from_mag: expected 257 bins per frame");
  Eigen::MatrixXd mel = bank.weights * mag;
  return mel.array().max(kLogFloor).log().matrix();
}

// Non-negative least-squares style inversion: clamp(pinv exp(L), 0).
inline Eigen::MatrixXd mag_from_logmel(const Eigen::MatrixXd& logmel,
                                       const MelBank& bank) {
  check(logmel.rows() == kMelBands, "mag_from_logmel: expected 64 bands");
  Eigen::MatrixXd mag = bank.inverse * logmel.array().exp().matrix();
  return mag.array().max(0.0).matrix();
}

// Log-mel magnitudes plus the phase needed to invert back to a waveform.
struct Spectrogram {
  Eigen::MatrixXd logmel;  // [64, N]
  Eigen::MatrixXd phase;   // [257, N] radians
  std::int64_t frames() const { return logmel.cols(); }
};

// Waveform -> (log-mel magnitude, phase). Models operate on the logmel part;
// the phase rides along unchanged for reconstruction.
inline Spectrogram features(const Waveform& w, const MelBank& bank) {
  check(w.sample_rate == kSampleRate,
        cat("features: expected ", kSampleRate, " Hz input, got ", w.sample_rate));
  Eigen::MatrixXcd spec = stft(w.samples);
  Spectrogram out;
  out.logmel = logmel_from_mag(spec.cwiseAbs(), bank);
  out.phase = spec.array().arg().matrix();
  return out;
}

// (enhanced log-mel, carried phase) -> waveform. Mel compression is inverted
// by the pseudoinverse with negatives clamped, the phase is reattached, and
// frames are overlap-added with least-squares window normalization.
// out_len < 0 keeps the full frame coverage (N-1)*hop + frame_len.
inline Waveform reconstruct(const Eigen::MatrixXd& logmel_hat,
                            const Eigen::MatrixXd& phase, const MelBank& bank,
                            std::int64_t out_len = -1) {
  check(logmel_hat.cols() == phase.cols(),
        cat("reconstruct: logmel has ", logmel_hat.cols(), " frames but phase has ",
            phase.cols()));
  check(phase.rows() == kNumBins, "reconstruct: expected 257 phase rows");
  Eigen::MatrixXd mag = mag_from_logmel(logmel_hat, bank);
  Eigen::MatrixXcd spec(kNumBins, phase.cols());
  spec.real() = (mag.array() * phase.array().cos()).matrix();
  spec.imag() = (mag.array() * phase.array().sin()).matrix();
  if (out_len < 0) out_len = (phase.cols() - 1) * kHopLen + kFrameLen;
  Waveform w;
  w.sample_rate = kSampleRate;
  w.samples = istft(spec, out_len);
  return w;
}

// ---------------------------------------------------------------------------
// Rational-rate resampler: windowed-sinc interpolation over the upsampled
// grid (Kaiser window, ~80 dB stopband, transition 2% of the narrower
// Nyquist). Sharp enough that a 3.9 kHz tone survives a 16 kHz -> 8 kHz
// conversion within 1 dB.
// ---------------------------------------------------------------------------

namespace detail {

inline double bessel_i0(double x) {
  // Power series; converges quickly for the argument range used here.
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace detail

inline std::vector<double> resample(const std::vector<double>& x, int fs_in,
                                    int fs_out) {
  check(fs_in > 0 && fs_out > 0, "resample: rates must be positive");
  if (fs_in == fs_out) return x;
  if (x.empty()) return {};
  const int g = std::gcd(fs_in, fs_out);
  const std::int64_t L = fs_out / g, M = fs_in / g;
  const double fs_up = static_cast<double>(fs_in) * static_cast<double>(L);
  const double min_nyq = 0.5 * std::min(fs_in, fs_out);
  const double trans = 0.02 * min_nyq;
  const double fc = min_nyq - 0.5 * trans;

  // Kaiser design for ~80 dB of alias rejection.
  const double atten = 80.0;
  const double beta = 0.1102 * (atten - 8.7);
  std::int64_t taps = static_cast<std::int64_t>(
      std::ceil((atten - 7.95) / (2.285 * 2.0 * kPi * trans / fs_up)));
  if (taps % 2 == 0) taps++;
  const std::int64_t half = taps / 2;
  std::vector<double> h(static_cast<std::size_t>(taps));
  const double i0b = detail::bessel_i0(beta);
  for (std::int64_t k = 0; k < taps; ++k) {
    const double d = static_cast<double>(k - half);
    const double arg = 2.0 * kPi * fc * d / fs_up;
    const double sinc = d == 0.0 ? 2.0 * fc / fs_up
                                 : std::sin(arg) / (kPi * d);
    const double t = 2.0 * static_cast<double>(k) / static_cast<double>(taps - 1) - 1.0;
    const double win = detail::bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - t * t))) / i0b;
    h[static_cast<std::size_t>(k)] = static_cast<double>(L) * sinc * win;
  }

  const std::int64_t in_len = static_cast<std::int64_t>(x.size());
  const std::int64_t out_len = (in_len * L) / M;
  std::vector<double> y(static_cast<std::size_t>(out_len), 0.0);
  for (std::int64_t j = 0; j < out_len; ++j) {
    const std::int64_t p = j * M;  // position on the upsampled grid
    // Input samples i with |p - i L| <= half contribute.
    std::int64_t i_lo = (p - half + L - 1) / L;
    if (p - half < 0) i_lo = 0;
    std::int64_t i_hi = std::min<std::int64_t>(in_len - 1, (p + half) / L);
    double acc = 0.0;
    for (std::int64_t i = std::max<std::int64_t>(0, i_lo); i <= i_hi; ++i)
      acc += h[static_cast<std::size_t>(p - i * L + half)] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(j)] = acc;
  }
  return y;
}

}  // namespace rcunet
