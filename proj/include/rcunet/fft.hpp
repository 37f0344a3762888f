// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

#include "rcunet/common.hpp"

namespace rcunet {

// Iterative radix-2 Cooley-Tukey transform, in place. Sizes must be powers
// of two; the inverse includes the 1/n scale so ifft(fft(x)) == x.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  check(n > 0 && (n & (n - 1)) == 0, "fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& v : a) v /= static_cast<double>(n);
}

// Real input, zero-padded to fft_size; returns the fft_size/2 + 1
// non-negative-frequency bins.
inline std::vector<std::complex<double>> rfft(const double* x, std::size_t len,
                                              std::size_t fft_size) {
  check(len <= fft_size, "rfft: input longer than transform size");
  std::vector<std::complex<double>> buf(fft_size, {0.0, 0.0});
  for (std::size_t i = 0; i < len; ++i) buf[i] = {x[i], 0.0};
  fft_inplace(buf, false);
  buf.resize(fft_size / 2 + 1);
  return buf;
}

// Inverse of rfft: expands the half spectrum by Hermitian symmetry and
// returns the real time signal of length fft_size.
inline std::vector<double> irfft(const std::vector<std::complex<double>>& half,
                                 std::size_t fft_size) {
  check(half.size() == fft_size / 2 + 1, "irfft: bad half-spectrum size");
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t k = 0; k < half.size(); ++k) buf[k] = half[k];
  for (std::size_t k = 1; k < fft_size / 2; ++k)
    buf[fft_size - k] = std::conj(half[k]);
  fft_inplace(buf, true);
  std::vector<double> out(fft_size);
  for (std::size_t i = 0; i < fft_size; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace rcunet
