// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Source-separation quality metrics: SDR, SIR, and SAR from the orthogonal
// decomposition of an estimate onto spans of delayed source and noise copies.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "rcunet/common.hpp"
#include "rcunet/wav.hpp"

namespace rcunet {

inline constexpr double kBssCapDb = 200.0;   // sentinel for vanishing errors
inline constexpr double kBssDiagReg = 1e-10; // normal-equation diagonal ridge

struct BssResult {
  double sdr_db = 0.0;
  double sir_db = 0.0;
  double sar_db = 0.0;
};

// Component energies of the decomposition, for auditing the orthogonality
// identity: estimate == target + interf + artif.
struct BssDecomposition {
  double estimate = 0.0;
  double target = 0.0;
  double interf = 0.0;
  double artif = 0.0;
};

namespace detail {

// Full cross-correlation r(k) = sum_t a(t) * b(t - k) over zero-padded
// signals, for k in [-max_lag, max_lag]; r[max_lag + k] holds lag k.
inline std::vector<double> xcorr(const std::vector<double>& a, const std::vector<double>& b,
                                 std::int64_t max_lag) {
  const std::int64_t T = static_cast<std::int64_t>(a.size());
  std::vector<double> r(static_cast<std::size_t>(2 * max_lag + 1), 0.0);
  for (std::int64_t k = -max_lag; k <= max_lag; ++k) {
    double acc = 0.0;
    const std::int64_t lo = std::max<std::int64_t>(0, k);
    const std::int64_t hi = std::min(T, T + k);
    for (std::int64_t t = lo; t < hi; ++t) acc += a[static_cast<std::size_t>(t)] * b[static_cast<std::size_t>(t - k)];
    r[static_cast<std::size_t>(max_lag + k)] = acc;
  }
  return r;
}

// y(t) += sum_i c(i) * x(t - i) on a buffer of length len(x) + L - 1.
inline void add_filtered(std::vector<double>& y, const std::vector<double>& x,
                         const double* c, std::int64_t L) {
  const std::int64_t T = static_cast<std::int64_t>(x.size());
  for (std::int64_t i = 0; i < L; ++i) {
    const double ci = c[i];
    if (ci == 0.0) continue;
    for (std::int64_t t = 0; t < T; ++t) y[static_cast<std::size_t>(t + i)] += ci * x[static_cast<std::size_t>(t)];
  }
}

inline double energy(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

inline double db_ratio(double num, double den) {
  if (num <= 0.0) return -kBssCapDb;
  if (den <= 0.0) return kBssCapDb;
  return std::clamp(10.0 * std::log10(num / den), -kBssCapDb, kBssCapDb);
}

}  // namespace detail

// Decomposes `estimate` into target, interference, and artifact components by
// projecting onto the span of `source` delayed 0..filter_len-1 samples and the
// joint span with delayed `noise`, then reports the energy ratios in dB.
// Projections solve regularized normal equations over the zero-padded support.
inline BssResult bss_eval(const std::vector<double>& estimate, const std::vector<double>& source,
                          const std::vector<double>& noise, std::int64_t filter_len = 512,
                          BssDecomposition* decomp = nullptr) {
  const std::int64_t T = static_cast<std::int64_t>(estimate.size());
  check(static_cast<std::int64_t>(source.size()) == T && static_cast<std::int64_t>(noise.size()) == T,
        "bss_eval: estimate, source, and noise must have equal lengths");
  check(filter_len >= 1, "bss_eval: filter_len must be at least 1");
  check(T >= filter_len, "bss_eval: signals shorter than the filter length");
  check(detail::energy(source) > 0.0, "bss_eval: source has zero energy");
  const std::int64_t L = filter_len;

  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;

  const auto r_ss = detail::xcorr(source, source, L - 1);
  const auto r_nn = detail::xcorr(noise, noise, L - 1);
  const auto r_sn = detail::xcorr(source, noise, L - 1);
  const auto r_es = detail::xcorr(estimate, source, L - 1);
  const auto r_en = detail::xcorr(estimate, noise, L - 1);
  const auto at = [&](const std::vector<double>& r, std::int64_t k) {
    return r[static_cast<std::size_t>(L - 1 + k)];
  };

  // Span of delayed source copies only.
  Mat gram_s(L, L);
  Vec rhs_s(L);
  for (std::int64_t i = 0; i < L; ++i) {
    rhs_s(i) = at(r_es, i);
    for (std::int64_t j = 0; j < L; ++j) gram_s(i, j) = at(r_ss, std::abs(i - j));
  }
  // Joint span of delayed source and delayed noise copies. Entry (i, j) is
  // <x(.-i), y(.-j)> = r_xy(j - i) over the padded support.
  Mat gram(2 * L, 2 * L);
  Vec rhs(2 * L);
  for (std::int64_t i = 0; i < L; ++i) {
    rhs(i) = at(r_es, i);
    rhs(L + i) = at(r_en, i);
    for (std::int64_t j = 0; j < L; ++j) {
      gram(i, j) = at(r_ss, std::abs(i - j));
      gram(L + i, L + j) = at(r_nn, std::abs(i - j));
      gram(i, L + j) = at(r_sn, j - i);
      gram(L + j, i) = at(r_sn, j - i);
    }
  }
  gram_s.diagonal().array() += kBssDiagReg;
  gram.diagonal().array() += kBssDiagReg;
  Vec c_s = gram_s.ldlt().solve(rhs_s);
  Vec c = gram.ldlt().solve(rhs);

  const std::size_t ext = static_cast<std::size_t>(T + L - 1);
  std::vector<double> s_target(ext, 0.0), joint(ext, 0.0);
  detail::add_filtered(s_target, source, c_s.data(), L);
  detail::add_filtered(joint, source, c.data(), L);
  detail::add_filtered(joint, noise, c.data() + L, L);

  std::vector<double> e_interf(ext), e_artif(ext), distortion(ext), target_plus_interf(ext);
  for (std::size_t t = 0; t < ext; ++t) {
    const double est = t < static_cast<std::size_t>(T) ? estimate[t] : 0.0;
    e_interf[t] = joint[t] - s_target[t];
    e_artif[t] = est - joint[t];
    distortion[t] = e_interf[t] + e_artif[t];
    target_plus_interf[t] = joint[t];
  }
  const double e_t = detail::energy(s_target);
  if (decomp) {
    decomp->estimate = detail::energy(estimate);
    decomp->target = e_t;
    decomp->interf = detail::energy(e_interf);
    decomp->artif = detail::energy(e_artif);
  }
  BssResult out;
  out.sdr_db = detail::db_ratio(e_t, detail::energy(distortion));
  out.sir_db = detail::db_ratio(e_t, detail::energy(e_interf));
  out.sar_db = detail::db_ratio(detail::energy(target_plus_interf), detail::energy(e_artif));
  return out;
}

inline BssResult bss_eval(const Waveform& estimate, const Waveform& source, const Waveform& noise,
                          std::int64_t filter_len = 512) {
  check(estimate.sample_rate == source.sample_rate && source.sample_rate == noise.sample_rate,
        "bss_eval: sample rates must match");
  return bss_eval(estimate.samples, source.samples, noise.samples, filter_len);
}

}  // namespace rcunet
