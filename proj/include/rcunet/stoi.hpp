// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Short-time objective intelligibility: correlates one-third-octave temporal
// envelopes of the clean and processed signals over 30-frame segments after
// resampling to 10 kHz and discarding silent frames.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcunet/common.hpp"
#include "rcunet/dsp.hpp"
#include "rcunet/fft.hpp"
#include "rcunet/wav.hpp"

namespace rcunet {

struct StoiResult {
  double score = 0.0;
};

namespace detail {

inline constexpr int kStoiRate = 10000;
inline constexpr std::int64_t kStoiFrame = 256;
inline constexpr std::int64_t kStoiHop = 128;
inline constexpr std::int64_t kStoiFft = 512;
inline constexpr std::int64_t kStoiBands = 15;
inline constexpr double kStoiLowestCenterHz = 150.0;
inline constexpr std::int64_t kStoiSegment = 30;   // frames per segment
inline constexpr double kStoiClipDb = -15.0;       // lower SDR bound
inline constexpr double kStoiSilenceDb = 40.0;     // dynamic range kept

inline std::vector<double> hann_symmetric(std::int64_t n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i + 1) / static_cast<double>(n + 1)));
  return w;
}

// Drops frames more than 40 dB below the loudest clean frame, judging
// loudness on the clean signal and rebuilding both signals by overlap-adding
// the kept windowed frames at consecutive hop positions.
inline void remove_silent_frames(std::vector<double>& clean, std::vector<double>& processed) {
  const auto w = hann_symmetric(kStoiFrame);
  const std::int64_t total = static_cast<std::int64_t>(clean.size());
  const std::int64_t frames = total < kStoiFrame ? 0 : (total - kStoiFrame) / kStoiHop + 1;
  std::vector<double> level(static_cast<std::size_t>(frames));
  double top = -1e300;
  for (std::int64_t f = 0; f < frames; ++f) {
    double e = 0.0;
    for (std::int64_t i = 0; i < kStoiFrame; ++i) {
      const double v = w[static_cast<std::size_t>(i)] * clean[static_cast<std::size_t>(f * kStoiHop + i)];
      e += v * v;
    }
    level[static_cast<std::size_t>(f)] = 10.0 * std::log10(std::max(e, 1e-300));
    top = std::max(top, level[static_cast<std::size_t>(f)]);
  }
  std::vector<double> out_c(clean.size(), 0.0), out_p(processed.size(), 0.0);
  std::int64_t kept = 0, last = 0;
  for (std::int64_t f = 0; f < frames; ++f) {
    if (level[static_cast<std::size_t>(f)] < top - kStoiSilenceDb) continue;
    for (std::int64_t i = 0; i < kStoiFrame; ++i) {
      const std::size_t dst = static_cast<std::size_t>(kept * kStoiHop + i);
      const std::size_t src = static_cast<std::size_t>(f * kStoiHop + i);
      out_c[dst] += w[static_cast<std::size_t>(i)] * clean[src];
      out_p[dst] += w[static_cast<std::size_t>(i)] * processed[src];
    }
    last = kept * kStoiHop + kStoiFrame;
    ++kept;
  }
  out_c.resize(static_cast<std::size_t>(last));
  out_p.resize(static_cast<std::size_t>(last));
  clean = std::move(out_c);
  processed = std::move(out_p);
}

// One-third-octave band envelopes: [bands, frames] of root band energies of
// 256-sample Hann frames zero-padded to a 512-point transform.
inline std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x) {
  const auto w = hann_symmetric(kStoiFrame);
  const std::int64_t total = static_cast<std::int64_t>(x.size());
  const std::int64_t frames = total < kStoiFrame ? 0 : (total - kStoiFrame) / kStoiHop + 1;
  const std::int64_t bins = kStoiFft / 2 + 1;

  // Band edges snap to the nearest STFT bin; band j spans [lo_j, hi_j).
  std::vector<std::int64_t> lo(kStoiBands), hi(kStoiBands);
  auto nearest_bin = [&](double hz) {
    const double width = static_cast<double>(kStoiRate) / static_cast<double>(kStoiFft);
    const std::int64_t i = static_cast<std::int64_t>(std::llround(hz / width));
    return std::clamp<std::int64_t>(i, 0, bins - 1);
  };
  for (std::int64_t j = 0; j < kStoiBands; ++j) {
    const double center = kStoiLowestCenterHz * std::pow(2.0, static_cast<double>(j) / 3.0);
    lo[static_cast<std::size_t>(j)] = nearest_bin(center * std::pow(2.0, -1.0 / 6.0));
    hi[static_cast<std::size_t>(j)] = nearest_bin(center * std::pow(2.0, 1.0 / 6.0));
  }

  std::vector<std::vector<double>> env(static_cast<std::size_t>(kStoiBands),
                                       std::vector<double>(static_cast<std::size_t>(frames), 0.0));
  std::vector<double> frame(static_cast<std::size_t>(kStoiFrame));
  for (std::int64_t f = 0; f < frames; ++f) {
    for (std::int64_t i = 0; i < kStoiFrame; ++i)
      frame[static_cast<std::size_t>(i)] =
          w[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(f * kStoiHop + i)];
    const auto spec = rfft(frame.data(), frame.size(), static_cast<std::size_t>(kStoiFft));
    for (std::int64_t j = 0; j < kStoiBands; ++j) {
      double e = 0.0;
      for (std::int64_t k = lo[static_cast<std::size_t>(j)]; k < hi[static_cast<std::size_t>(j)]; ++k)
        e += std::norm(spec[static_cast<std::size_t>(k)]);
      env[static_cast<std::size_t>(j)][static_cast<std::size_t>(f)] = std::sqrt(e);
    }
  }
  return env;
}

inline double correlation(const double* a, const double* b, std::int64_t n) {
  double ma = 0.0, mb = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  const double den = std::sqrt(da * db);
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

// Intelligibility of `processed` against the clean reference, in [0, 1] for
// typical signals. Both are resampled to 10 kHz internally.
inline StoiResult stoi(const Waveform& clean, const Waveform& processed) {
  check(clean.samples.size() == processed.samples.size(),
        "stoi: clean and processed lengths differ");
  check(clean.sample_rate == processed.sample_rate, "stoi: sample rates differ");
  std::vector<double> x = resample(clean.samples, clean.sample_rate, detail::kStoiRate);
  std::vector<double> y = resample(processed.samples, processed.sample_rate, detail::kStoiRate);
  y.resize(x.size(), 0.0);

  bool any_sound = false;
  for (double v : x) any_sound = any_sound || v != 0.0;
  check(any_sound, "stoi: clean input is silent");

  detail::remove_silent_frames(x, y);
  const auto env_x = detail::band_envelopes(x);
  const auto env_y = detail::band_envelopes(y);
  const std::int64_t frames = static_cast<std::int64_t>(env_x[0].size());
  check(frames >= detail::kStoiSegment, "stoi: fewer than ", detail::kStoiSegment,
        " frames of active speech");

  const double clip = std::pow(10.0, -detail::kStoiClipDb / 20.0);
  const std::int64_t S = detail::kStoiSegment;
  double acc = 0.0;
  std::int64_t count = 0;
  std::vector<double> yseg(static_cast<std::size_t>(S));
  for (std::int64_t m = S - 1; m < frames; ++m) {
    for (std::int64_t j = 0; j < detail::kStoiBands; ++j) {
      const double* xs = env_x[static_cast<std::size_t>(j)].data() + (m - S + 1);
      const double* ys = env_y[static_cast<std::size_t>(j)].data() + (m - S + 1);
      double ex = 0.0, ey = 0.0;
      for (std::int64_t i = 0; i < S; ++i) {
        ex += xs[i] * xs[i];
        ey += ys[i] * ys[i];
      }
      const double alpha = std::sqrt(ex / std::max(ey, 1e-300));
      for (std::int64_t i = 0; i < S; ++i)
        yseg[static_cast<std::size_t>(i)] = std::min(alpha * ys[i], xs[i] * (1.0 + clip));
      acc += detail::correlation(xs, yseg.data(), S);
      ++count;
    }
  }
  return StoiResult{acc / static_cast<double>(count)};
}

}  // namespace rcunet
