// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rcunet/common.hpp"
#include "rcunet/wav.hpp"

namespace rcunet {

// Synthetic stand-ins for speech and environmental-noise recordings: a
// harmonic "talker" with drifting pitch, gliding formants, syllabic amplitude
// modulation and fricative-like bursts, and two noise flavors built from it.
// Everything is a pure function of (seed, duration), bit-reproducible.

enum class NoiseKind { babble, factory };

inline std::string noise_kind_name(NoiseKind k) {
  return k == NoiseKind::babble ? "babble" : "factory";
}

inline NoiseKind noise_kind_from_name(const std::string& s) {
  if (s == "babble") return NoiseKind::babble;
  if (s == "factory") return NoiseKind::factory;
  fail("unknown noise kind '", s, "' (expected babble or factory)");
}

namespace detail {

// Two-pole resonator y[n] = a x[n] + 2 r cos(th) y[n-1] - r^2 y[n-2] with
// unit gain at the center frequency. Coefficients may be updated per sample.
class Resonator {
 public:
  void tune(double center_hz, double bandwidth_hz, double fs) {
    r_ = std::exp(-kPi * bandwidth_hz / fs);
    const double th = 2.0 * kPi * center_hz / fs;
    c1_ = 2.0 * r_ * std::cos(th);
    c2_ = -r_ * r_;
    gain_ = (1.0 - r_ * r_) * std::sin(th);
  }

  double step(double x) {
    const double y = gain_ * x + c1_ * y1_ + c2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double r_ = 0.0, c1_ = 0.0, c2_ = 0.0, gain_ = 0.0;
  double y1_ = 0.0, y2_ = 0.0;
};

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  check(m > 0.0, "normalize_peak: silent signal");
  const double g = peak / m;
  for (double& v : x) v *= g;
}

}  // namespace detail

// Speech-like signal: a harmonic source whose fundamental drifts inside
// 90-250 Hz, shaped by three slowly gliding formant resonators, modulated at
// a syllabic rate, with unvoiced noise bursts dropped into syllable gaps.
// Peak-normalized to 0.5.
inline Waveform synth_speech(std::uint64_t seed, double duration) {
  check(duration > 0.0, "synth_speech: duration must be positive");
  const int fs = 8000;
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  check(n > 0, "synth_speech: duration rounds to zero samples");
  Rng rng(seed);

  // Pitch contour: slow sinusoidal drift kept strictly inside 90-250 Hz.
  const double f0_base = rng.uniform(135.0, 205.0);
  const double f0_depth = rng.uniform(20.0, 44.0);
  const double f0_rate = rng.uniform(0.2, 0.6);
  const double f0_phase = rng.uniform(0.0, 2.0 * kPi);

  // Fixed harmonic count so partials never pop in or out mid-utterance.
  const int harmonics = std::max(
      6, static_cast<int>(std::floor(3600.0 / (f0_base + f0_depth))));
  std::vector<double> hphase(static_cast<std::size_t>(harmonics));
  for (auto& p : hphase) p = rng.uniform(0.0, 2.0 * kPi);

  const double am_rate = rng.uniform(3.0, 6.0);
  const double am_phase = rng.uniform(0.0, 2.0 * kPi);

  // Formant targets are redrawn per syllable and glided linearly.
  const double lo[3] = {300.0, 900.0, 2100.0};
  const double hi[3] = {800.0, 1900.0, 3000.0};
  const double bw[3] = {90.0, 110.0, 150.0};
  const double fgain[3] = {1.0, 0.63, 0.35};
  double fcur[3], fnext[3];
  for (int k = 0; k < 3; ++k) {
    fcur[k] = rng.uniform(lo[k], hi[k]);
    fnext[k] = rng.uniform(lo[k], hi[k]);
  }
  detail::Resonator formant[3];
  const double syllable = 1.0 / am_rate;
  double seg_t = 0.0;

  // Unvoiced bursts: Poisson arrivals, each a short shaped-noise puff that
  // ducks the voiced part while it lasts.
  double next_burst = -std::log(1.0 - rng.uniform()) / 1.5;
  double burst_end = -1.0, burst_amp = 0.0, burst_start = 0.0;
  detail::Resonator fricative;
  Waveform w;
  w.sample_rate = fs;
  w.samples.resize(n);

  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    if (t >= seg_t + syllable) {
      seg_t += syllable;
      for (int k = 0; k < 3; ++k) {
        fcur[k] = fnext[k];
        fnext[k] = rng.uniform(lo[k], hi[k]);
      }
    }
    if (t >= next_burst && t > burst_end) {
      burst_start = t;
      burst_end = t + rng.uniform(0.04, 0.09);
      burst_amp = rng.uniform(0.15, 0.3);
      fricative.tune(rng.uniform(1800.0, 3400.0), 600.0, fs);
      next_burst = t + rng.uniform(0.05, 0.1) -
                   std::log(1.0 - rng.uniform()) / 1.5;
    }

    const double f0 =
        f0_base + f0_depth * std::sin(2.0 * kPi * f0_rate * t + f0_phase);
    phase += 2.0 * kPi * f0 / fs;
    double src = 0.0;
    for (int h = 1; h <= harmonics; ++h)
      src += std::sin(h * phase + hphase[static_cast<std::size_t>(h - 1)]) /
             static_cast<double>(h);

    const double frac = (t - seg_t) / syllable;
    double voiced = 0.0;
    for (int k = 0; k < 3; ++k) {
      formant[k].tune(fcur[k] + (fnext[k] - fcur[k]) * frac, bw[k], fs);
      voiced += fgain[k] * formant[k].step(src);
    }
    const double am =
        0.1 + 0.9 * (0.5 - 0.5 * std::cos(2.0 * kPi * am_rate * t + am_phase));

    double burst = 0.0;
    double duck = 1.0;
    if (t < burst_end) {
      const double u = (t - burst_start) / (burst_end - burst_start);
      const double env = 0.5 - 0.5 * std::cos(2.0 * kPi * u);
      burst = burst_amp * env * fricative.step(rng.gaussian());
      duck = 1.0 - 0.7 * env;
    }
    w.samples[i] = duck * am * voiced + burst;
  }
  detail::normalize_peak(w.samples, 0.5);
  return w;
}

namespace detail {

// Babble: eight independent talkers summed.
inline Waveform babble_noise(std::uint64_t seed, double duration) {
  Rng rng(seed);
  Waveform out;
  out.sample_rate = 8000;
  for (int s = 0; s < 8; ++s) {
    auto talker = synth_speech(rng.next_u64(), duration);
    if (s == 0)
      out.samples = std::move(talker.samples);
    else
      for (std::size_t i = 0; i < out.samples.size(); ++i)
        out.samples[i] += talker.samples[i];
  }
  normalize_peak(out.samples, 0.5);
  return out;
}

// Factory: broadband noise through a small resonant bank plus sparse
// impulsive "clanks" (decaying sinusoids at Poisson arrival times).
inline Waveform factory_noise(std::uint64_t seed, double duration) {
  const int fs = 8000;
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  check(n > 0, "factory_noise: duration rounds to zero samples");
  Rng rng(seed);
  Resonator bank[4];
  const double centers[4] = {350.0, 900.0, 1700.0, 2600.0};
  const double widths[4] = {150.0, 200.0, 250.0, 300.0};
  const double gains[4] = {1.0, 0.7, 0.5, 0.35};
  for (int k = 0; k < 4; ++k)
    bank[k].tune(centers[k] * rng.uniform(0.85, 1.15), widths[k], fs);

  Waveform w;
  w.sample_rate = fs;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double white = rng.gaussian();
    double v = 0.15 * white;
    for (int k = 0; k < 4; ++k) v += gains[k] * bank[k].step(white);
    w.samples[i] = v;
  }

  // Estimate the hum level so clank amplitudes scale with it.
  double sq = 0.0;
  for (double v : w.samples) sq += v * v;
  const double hum_rms = std::sqrt(sq / static_cast<double>(n));

  double t = -std::log(1.0 - rng.uniform()) / 2.5;
  while (t < duration) {
    const double freq = rng.uniform(400.0, 3200.0);
    const double tau = rng.uniform(0.008, 0.04);
    const double amp = hum_rms * rng.uniform(4.0, 9.0);
    const auto start = static_cast<std::size_t>(t * fs);
    const auto len = static_cast<std::size_t>(5.0 * tau * fs);
    for (std::size_t j = 0; j < len && start + j < n; ++j) {
      const double dt = static_cast<double>(j) / fs;
      w.samples[start + j] +=
          amp * std::exp(-dt / tau) * std::sin(2.0 * kPi * freq * dt);
    }
    t += -std::log(1.0 - rng.uniform()) / 2.5;
  }
  normalize_peak(w.samples, 0.5);
  return w;
}

}  // namespace detail

inline Waveform synth_noise(std::uint64_t seed, double duration,
                            NoiseKind kind) {
  return kind == NoiseKind::babble ? detail::babble_noise(seed, duration)
                                   : detail::factory_noise(seed, duration);
}

// Scales `noise` so that 10 log10(E_clean / E_noise) equals snr_db, then adds
// it to `clean`. If the noise is longer, a crop offset is drawn from `rng`.
// When the raw sum would clip 16-bit storage, all three signals are rescaled
// by a common factor, which preserves both the SNR and the additive identity
// mixture == clean + noise.
struct MixResult {
  Waveform clean;
  Waveform noise;    // scaled (and cropped) noise actually added
  Waveform mixture;  // clean + noise, sample by sample
};

inline MixResult mix_at_snr(const Waveform& clean, const Waveform& noise,
                            double snr_db, Rng& rng) {
  check(clean.sample_rate == noise.sample_rate,
        "mix_at_snr: sample rate mismatch");
  check(noise.size() >= clean.size(),
        cat("mix_at_snr: noise (", noise.size(), ") shorter than clean (",
            clean.size(), ")"));
  const std::size_t slack = noise.size() - clean.size();
  const std::size_t offset =
      static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(slack) + 1));

  double e_clean = 0.0;
  for (double v : clean.samples) e_clean += v * v;
  double e_noise = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double v = noise.samples[offset + i];
    e_noise += v * v;
  }
  check(e_clean > 0.0, "mix_at_snr: silent clean signal");
  check(e_noise > 0.0, "mix_at_snr: silent noise crop");
  const double g = std::sqrt(e_clean / (e_noise * std::pow(10.0, snr_db / 10.0)));

  MixResult r;
  r.clean = clean;
  r.noise.sample_rate = clean.sample_rate;
  r.mixture.sample_rate = clean.sample_rate;
  r.noise.samples.resize(clean.size());
  r.mixture.samples.resize(clean.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    r.noise.samples[i] = g * noise.samples[offset + i];
    r.mixture.samples[i] = r.clean.samples[i] + r.noise.samples[i];
    peak = std::max(peak, std::abs(r.mixture.samples[i]));
  }
  if (peak > 0.99) {
    const double c = 0.99 / peak;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      r.clean.samples[i] *= c;
      r.noise.samples[i] *= c;
      r.mixture.samples[i] = r.clean.samples[i] + r.noise.samples[i];
    }
  }
  return r;
}

}  // namespace rcunet
