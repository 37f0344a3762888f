// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdio>
#include <limits>
#include <memory>
#include <vector>

#include "rcunet/tensor_ops.hpp"

namespace rcunet {

// Feature maps are rank-3 row-major tensors [bands, frames, channels]; the
// channel axis is last so an im2col patch row is a sequence of contiguous
// channel blocks.

namespace detail {

// Fills rows [row0, row0+rows) of the patch matrix P (rows x ks*ks*Ci) for a
// "same" zero-padded ks x ks convolution over src viewed as [B,N,Ci].
template <class T>
void im2col_rows(const T* src, std::int64_t B, std::int64_t N, std::int64_t Ci,
                 int ks, std::int64_t row0, std::int64_t rows, T* P) {
  const int pad = ks / 2;
  const std::int64_t patch = static_cast<std::int64_t>(ks) * ks * Ci;
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t p = row0 + r;
    const std::int64_t b = p / N, n = p % N;
    T* dst = P + r * patch;
    for (int db = 0; db < ks; ++db) {
      const std::int64_t ib = b + db - pad;
      if (ib < 0 || ib >= B) {
        std::fill_n(dst, static_cast<std::int64_t>(ks) * Ci, T(0));
        dst += static_cast<std::int64_t>(ks) * Ci;
        continue;
      }
      for (int dn = 0; dn < ks; ++dn) {
        const std::int64_t in = n + dn - pad;
        if (in < 0 || in >= N) {
          std::fill_n(dst, Ci, T(0));
        } else {
          std::copy_n(src + (ib * N + in) * Ci, Ci, dst);
        }
        dst += Ci;
      }
    }
  }
}

// y[B*N, Co] = conv_same(x[B,N,Ci], k as [ks*ks*Ci, Co]) computed in row
// chunks so the patch matrix stays small.
template <class T>
void conv_same_gemm(const T* x, std::int64_t B, std::int64_t N, std::int64_t Ci,
                    int ks, const T* kmat, std::int64_t Co, T* y,
                    bool accumulate) {
  const std::int64_t patch = static_cast<std::int64_t>(ks) * ks * Ci;
  const std::int64_t total = B * N;
  const std::int64_t chunk = std::max<std::int64_t>(1, (std::int64_t(1) << 19) / std::max<std::int64_t>(patch, 1));
  std::vector<T> pbuf(static_cast<std::size_t>(std::min(chunk, total) * patch));
  MapCM<T> K(kmat, patch, Co);
  for (std::int64_t row0 = 0; row0 < total; row0 += chunk) {
    const std::int64_t rows = std::min(chunk, total - row0);
    im2col_rows(x, B, N, Ci, ks, row0, rows, pbuf.data());
    MapCM<T> P(pbuf.data(), rows, patch);
    MapM<T> Y(y + row0 * Co, rows, Co);
    if (accumulate)
      Y.noalias() += P * K;
    else
      Y.noalias() = P * K;
  }
}

// dK[ks*ks*Ci, Co] += sum over chunks of P^T * dY, evaluated serially so the
// accumulation order is fixed.
template <class T>
void conv_same_weight_grad(const T* x, std::int64_t B, std::int64_t N,
                           std::int64_t Ci, int ks, const T* dy,
                           std::int64_t Co, T* dk) {
  const std::int64_t patch = static_cast<std::int64_t>(ks) * ks * Ci;
  const std::int64_t total = B * N;
  const std::int64_t chunk = std::max<std::int64_t>(1, (std::int64_t(1) << 19) / std::max<std::int64_t>(patch, 1));
  std::vector<T> pbuf(static_cast<std::size_t>(std::min(chunk, total) * patch));
  MapM<T> dK(dk, patch, Co);
  for (std::int64_t row0 = 0; row0 < total; row0 += chunk) {
    const std::int64_t rows = std::min(chunk, total - row0);
    im2col_rows(x, B, N, Ci, ks, row0, rows, pbuf.data());
    MapCM<T> P(pbuf.data(), rows, patch);
    MapCM<T> dY(dy + row0 * Co, rows, Co);
    dK.noalias() += P.transpose() * dY;
  }
}

}  // namespace detail

// 2D convolution with "same" zero padding and odd kernel size.
// x: [B,N,Ci], kernel: [ks,ks,Ci,Co], bias: [Co] -> [B,N,Co].
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                 const Tensor<T>& bias) {
  check(x.rank() == 3, "conv2d: input must be [bands, frames, channels]");
  check(kernel.rank() == 4 && kernel.dim(0) == kernel.dim(1),
        "conv2d: kernel must be [ks,ks,Ci,Co]");
  const int ks = static_cast<int>(kernel.dim(0));
  check(ks % 2 == 1, "conv2d: kernel size must be odd for same padding");
  const std::int64_t B = x.dim(0), N = x.dim(1), Ci = x.dim(2);
  const std::int64_t Co = kernel.dim(3);
  check(kernel.dim(2) == Ci,
        cat("conv2d: kernel expects ", kernel.dim(2), " input channels, got ",
            Ci));
  check(bias.rank() == 1 && bias.dim(0) == Co, "conv2d: bias must be [Co]");

  Tensor<T> out = Tensor<T>::zeros({B, N, Co});
  detail::conv_same_gemm(x.data(), B, N, Ci, ks, kernel.data(), Co, out.data(),
                         false);
  MapM<T> O(out.data(), B * N, Co);
  MapCM<T> bv(bias.data(), 1, Co);
  O.rowwise() += bv.row(0);

  if (detail::track<T>({&x, &kernel, &bias})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), ki = kernel.impl(), bi = bias.impl(), oi = out.impl();
    Tape<T>::current()->record([xi, ki, bi, oi, B, N, Ci, Co, ks] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      const T* dy = og->data();
      if (bi->requires_grad) {
        bi->ensure_grad();
        // Fixed-order accumulation keeps reruns bitwise reproducible.
        T* db = bi->grad.data();
        for (std::int64_t r = 0; r < B * N; ++r)
          for (std::int64_t c = 0; c < Co; ++c) db[c] += dy[r * Co + c];
      }
      if (ki->requires_grad) {
        ki->ensure_grad();
        detail::conv_same_weight_grad(xi->value.data(), B, N, Ci, ks, dy, Co,
                                      ki->grad.data());
      }
      if (xi->requires_grad) {
        xi->ensure_grad();
        // Input gradient is the same convolution applied to dY with the
        // kernel flipped in both spatial axes and transposed in channels.
        std::vector<T> kflip(static_cast<std::size_t>(ks) * ks * Co * Ci);
        for (int db = 0; db < ks; ++db)
          for (int dn = 0; dn < ks; ++dn)
            for (std::int64_t ci = 0; ci < Ci; ++ci)
              for (std::int64_t co = 0; co < Co; ++co)
                kflip[((static_cast<std::int64_t>(db) * ks + dn) * Co + co) *
                          Ci +
                      ci] =
                    ki->value[((static_cast<std::int64_t>(ks - 1 - db) * ks +
                                (ks - 1 - dn)) *
                                   Ci +
                               ci) *
                                  Co +
                              co];
        detail::conv_same_gemm(dy, B, N, Co, ks, kflip.data(), Ci,
                               xi->grad.data(), true);
      }
    });
  }
  return out;
}

// Transposed 2D convolution: 6x6 kernel, stride 2, crop 2 on every border,
// so [B,N,Ci] -> [2B,2N,Co]. Equivalent to zero-stuffing the input and
// running a full 6x6 correlation, then cropping two samples per edge:
//   out[bo,no,co] = bias[co]
//     + sum_{db,dn,ci} x[(bo-3+db)/2, (no-3+dn)/2, ci] * k[db,dn,ci,co]
// over taps where both divisions are exact and in range.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& kernel,
                           const Tensor<T>& bias) {
  check(x.rank() == 3, "conv_transpose2d: input must be rank 3");
  check(kernel.rank() == 4 && kernel.dim(0) == 6 && kernel.dim(1) == 6,
        "conv_transpose2d: kernel must be [6,6,Ci,Co]");
  const std::int64_t B = x.dim(0), N = x.dim(1), Ci = x.dim(2);
  const std::int64_t Co = kernel.dim(3);
  check(kernel.dim(2) == Ci, "conv_transpose2d: channel mismatch");
  check(bias.rank() == 1 && bias.dim(0) == Co,
        "conv_transpose2d: bias must be [Co]");

  const std::int64_t Bo = 2 * B, No = 2 * N;
  Tensor<T> out = Tensor<T>::zeros({Bo, No, Co});
  MapM<T> Y(out.data(), Bo * No, Co);
  MapCM<T> bv(bias.data(), 1, Co);
  Y.rowwise() = bv.row(0);

  MapCM<T> X(x.data(), B * N, Ci);
  // Input index i contributes to output 2i + 3 - d; clip to [0, 2*In).
  // The upper bound needs floor division, which differs from C++ integer
  // division when 2*In - 4 + d is negative (single-sample inputs).
  auto tap_ranges = [](int d, std::int64_t In, std::int64_t& lo,
                       std::int64_t& hi) {
    const std::int64_t num = 2 * In - 4 + d;
    lo = std::max<std::int64_t>(0, (d - 2) / 2);
    hi = std::min<std::int64_t>(In - 1, num >= 0 ? num / 2 : -((-num + 1) / 2));
  };

  std::vector<T> tmp;
  for (int db = 0; db < 6; ++db) {
    std::int64_t bi_lo, bi_hi;
    tap_ranges(db, B, bi_lo, bi_hi);
    for (int dn = 0; dn < 6; ++dn) {
      std::int64_t ni_lo, ni_hi;
      tap_ranges(dn, N, ni_lo, ni_hi);
      if (bi_lo > bi_hi || ni_lo > ni_hi) continue;
      const std::int64_t nc = ni_hi - ni_lo + 1;
      MapCM<T> K(kernel.data() + (static_cast<std::int64_t>(db) * 6 + dn) * Ci * Co,
                 Ci, Co);
      tmp.resize(static_cast<std::size_t>(nc * Co));
      MapM<T> Tm(tmp.data(), nc, Co);
      for (std::int64_t bi = bi_lo; bi <= bi_hi; ++bi) {
        const std::int64_t bo = 2 * bi + 3 - db;
        Tm.noalias() = X.middleRows(bi * N + ni_lo, nc) * K;
        for (std::int64_t j = 0; j < nc; ++j) {
          const std::int64_t no = 2 * (ni_lo + j) + 3 - dn;
          T* yrow = out.data() + (bo * No + no) * Co;
          const T* trow = tmp.data() + j * Co;
          for (std::int64_t c = 0; c < Co; ++c) yrow[c] += trow[c];
        }
      }
    }
  }

  if (detail::track<T>({&x, &kernel, &bias})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), ki = kernel.impl(), bi2 = bias.impl(), oi = out.impl();
    Tape<T>::current()->record([xi, ki, bi2, oi, B, N, Ci, Co] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      const std::int64_t No = 2 * N;
      if (bi2->requires_grad) {
        bi2->ensure_grad();
        // Fixed-order accumulation keeps reruns bitwise reproducible.
        const T* dyb = og->data();
        T* db = bi2->grad.data();
        for (std::int64_t r = 0; r < 4 * B * N; ++r)
          for (std::int64_t c = 0; c < Co; ++c) db[c] += dyb[r * Co + c];
      }
      if (!xi->requires_grad && !ki->requires_grad) return;
      if (xi->requires_grad) xi->ensure_grad();
      if (ki->requires_grad) ki->ensure_grad();
      MapCM<T> X(xi->value.data(), B * N, Ci);
      auto tap_ranges = [](int d, std::int64_t In, std::int64_t& lo,
                           std::int64_t& hi) {
        const std::int64_t num = 2 * In - 4 + d;
        lo = std::max<std::int64_t>(0, (d - 2) / 2);
        hi = std::min<std::int64_t>(In - 1,
                                    num >= 0 ? num / 2 : -((-num + 1) / 2));
      };
      std::vector<T> gather;
      for (int db = 0; db < 6; ++db) {
        std::int64_t bi_lo, bi_hi;
        tap_ranges(db, B, bi_lo, bi_hi);
        for (int dn = 0; dn < 6; ++dn) {
          std::int64_t ni_lo, ni_hi;
          tap_ranges(dn, N, ni_lo, ni_hi);
          if (bi_lo > bi_hi || ni_lo > ni_hi) continue;
          const std::int64_t nc = ni_hi - ni_lo + 1;
          const std::int64_t koff =
              (static_cast<std::int64_t>(db) * 6 + dn) * Ci * Co;
          MapCM<T> K(ki->value.data() + koff, Ci, Co);
          gather.resize(static_cast<std::size_t>(nc * Co));
          MapM<T> G(gather.data(), nc, Co);
          for (std::int64_t bi = bi_lo; bi <= bi_hi; ++bi) {
            const std::int64_t bo = 2 * bi + 3 - db;
            for (std::int64_t j = 0; j < nc; ++j) {
              const std::int64_t no = 2 * (ni_lo + j) + 3 - dn;
              std::copy_n(og->data() + (bo * No + no) * Co, Co,
                          gather.data() + j * Co);
            }
            if (xi->requires_grad) {
              MapM<T> dX(xi->grad.data(), B * N, Ci);
              dX.middleRows(bi * N + ni_lo, nc).noalias() += G * K.transpose();
            }
            if (ki->requires_grad) {
              MapM<T> dK(ki->grad.data() + koff, Ci, Co);
              dK.noalias() +=
                  X.middleRows(bi * N + ni_lo, nc).transpose() * G;
            }
          }
        }
      }
    });
  }
  return out;
}

// 2x2 max pooling with stride 2 and ceil output shape; odd trailing rows or
// columns see an implicit -inf pad. Ties take the first element in row-major
// window order, and the gradient routes to that element alone.
template <class T>
Tensor<T> maxpool2x2(const Tensor<T>& x) {
  check(x.rank() == 3, "maxpool2x2: input must be rank 3");
  const std::int64_t B = x.dim(0), N = x.dim(1), K = x.dim(2);
  const std::int64_t Bo = (B + 1) / 2, No = (N + 1) / 2;
  Tensor<T> out = Tensor<T>::zeros({Bo, No, K});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(Bo * No * K));
  for (std::int64_t ob = 0; ob < Bo; ++ob)
    for (std::int64_t on = 0; on < No; ++on)
      for (std::int64_t k = 0; k < K; ++k) {
        T best = -std::numeric_limits<T>::infinity();
        std::int64_t best_idx = -1;
        for (std::int64_t db = 0; db < 2; ++db)
          for (std::int64_t dn = 0; dn < 2; ++dn) {
            const std::int64_t ib = 2 * ob + db, in = 2 * on + dn;
            if (ib >= B || in >= N) continue;
            const std::int64_t idx = (ib * N + in) * K + k;
            if (x.data()[idx] > best) {
              best = x.data()[idx];
              best_idx = idx;
            }
          }
        out.data()[(ob * No + on) * K + k] = best;
        (*argmax)[static_cast<std::size_t>((ob * No + on) * K + k)] = best_idx;
      }
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi, argmax] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < og->size(); ++i)
        xi->grad[static_cast<std::size_t>((*argmax)[i])] += (*og)[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over all axes except the trailing feature axis.
// ---------------------------------------------------------------------------

enum class BnMode { train, eval };

template <class T>
struct BnState {
  std::vector<T> run_mean, run_var;
  std::int64_t updates = 0;
  bool warned = false;

  void init(std::int64_t features) {
    run_mean.assign(static_cast<std::size_t>(features), T(0));
    run_var.assign(static_cast<std::size_t>(features), T(1));
    updates = 0;
    warned = false;
  }
};

template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma,
                    const Tensor<T>& beta, BnState<T>& state, BnMode mode,
                    T momentum = T(0.99), T eps = T(1e-5)) {
  check(x.rank() >= 2, "batchnorm: input must have a feature axis");
  const std::int64_t K = x.dim(x.rank() - 1);
  const std::int64_t m = x.numel() / K;
  check(gamma.rank() == 1 && gamma.dim(0) == K && beta.rank() == 1 &&
            beta.dim(0) == K,
        "batchnorm: gamma/beta must be [features]");
  check(static_cast<std::int64_t>(state.run_mean.size()) == K,
        "batchnorm: state not initialized for this feature count");

  std::vector<T> mean(static_cast<std::size_t>(K)),
      inv(static_cast<std::size_t>(K));
  if (mode == BnMode::train) {
    check(m > 1, "batchnorm: train mode needs more than one element per feature");
    std::vector<T> var(static_cast<std::size_t>(K), T(0));
    std::fill(mean.begin(), mean.end(), T(0));
    for (std::int64_t r = 0; r < m; ++r)
      for (std::int64_t k = 0; k < K; ++k)
        mean[static_cast<std::size_t>(k)] += x.data()[r * K + k];
    for (auto& v : mean) v /= static_cast<T>(m);
    for (std::int64_t r = 0; r < m; ++r)
      for (std::int64_t k = 0; k < K; ++k) {
        T d = x.data()[r * K + k] - mean[static_cast<std::size_t>(k)];
        var[static_cast<std::size_t>(k)] += d * d;
      }
    for (auto& v : var) v /= static_cast<T>(m);
    for (std::int64_t k = 0; k < K; ++k) {
      auto ks = static_cast<std::size_t>(k);
      state.run_mean[ks] = momentum * state.run_mean[ks] + (T(1) - momentum) * mean[ks];
      state.run_var[ks] = momentum * state.run_var[ks] + (T(1) - momentum) * var[ks];
      inv[ks] = T(1) / std::sqrt(var[ks] + eps);
    }
    state.updates++;
  } else {
    if (state.updates == 0 && !state.warned) {
      std::fprintf(stderr,
                   "[rcunet] warning: batchnorm evaluated before any training "
                   "update; using default statistics (mean 0, var 1)\n");
      state.warned = true;
    }
    for (std::int64_t k = 0; k < K; ++k) {
      auto ks = static_cast<std::size_t>(k);
      mean[ks] = state.run_mean[ks];
      inv[ks] = T(1) / std::sqrt(state.run_var[ks] + eps);
    }
  }

  Tensor<T> out = detail::like(x);
  auto xhat = std::make_shared<std::vector<T>>(x.value().size());
  for (std::int64_t r = 0; r < m; ++r)
    for (std::int64_t k = 0; k < K; ++k) {
      auto i = static_cast<std::size_t>(r * K + k);
      auto ks = static_cast<std::size_t>(k);
      (*xhat)[i] = (x.data()[i] - mean[ks]) * inv[ks];
      out.data()[i] = gamma.data()[ks] * (*xhat)[i] + beta.data()[ks];
    }

  if (detail::track<T>({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    auto invs = std::make_shared<std::vector<T>>(inv);
    const bool train = mode == BnMode::train;
    Tape<T>::current()->record([xi, gi, bi, oi, xhat, invs, m, K, train] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::int64_t r = 0; r < m; ++r)
          for (std::int64_t k = 0; k < K; ++k)
            bi->grad[static_cast<std::size_t>(k)] +=
                (*og)[static_cast<std::size_t>(r * K + k)];
      }
      if (gi->requires_grad) {
        gi->ensure_grad();
        for (std::int64_t r = 0; r < m; ++r)
          for (std::int64_t k = 0; k < K; ++k) {
            auto i = static_cast<std::size_t>(r * K + k);
            gi->grad[static_cast<std::size_t>(k)] += (*og)[i] * (*xhat)[i];
          }
      }
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      if (!train) {
        // Running statistics are constants in eval mode.
        for (std::int64_t r = 0; r < m; ++r)
          for (std::int64_t k = 0; k < K; ++k) {
            auto i = static_cast<std::size_t>(r * K + k);
            auto ks = static_cast<std::size_t>(k);
            xi->grad[i] += (*og)[i] * gi->value[ks] * (*invs)[ks];
          }
        return;
      }
      // Train mode: the batch statistics depend on x, giving the usual
      // three-term expression
      //   dx = inv/m * (m*dxh - sum(dxh) - xhat * sum(dxh*xhat)).
      std::vector<T> sum_dxh(static_cast<std::size_t>(K), T(0));
      std::vector<T> sum_dxh_xh(static_cast<std::size_t>(K), T(0));
      for (std::int64_t r = 0; r < m; ++r)
        for (std::int64_t k = 0; k < K; ++k) {
          auto i = static_cast<std::size_t>(r * K + k);
          auto ks = static_cast<std::size_t>(k);
          T dxh = (*og)[i] * gi->value[ks];
          sum_dxh[ks] += dxh;
          sum_dxh_xh[ks] += dxh * (*xhat)[i];
        }
      const T mi = T(1) / static_cast<T>(m);
      for (std::int64_t r = 0; r < m; ++r)
        for (std::int64_t k = 0; k < K; ++k) {
          auto i = static_cast<std::size_t>(r * K + k);
          auto ks = static_cast<std::size_t>(k);
          T dxh = (*og)[i] * gi->value[ks];
          xi->grad[i] += (*invs)[ks] * mi *
                         (static_cast<T>(m) * dxh - sum_dxh[ks] -
                          (*xhat)[i] * sum_dxh_xh[ks]);
        }
    });
  }
  return out;
}

// Pads the frame axis of [B,N,K] by symmetric reflection (the edge sample is
// not repeated); used to make the frame count divisible before pooling.
template <class T>
Tensor<T> pad_frames_reflect(const Tensor<T>& x, std::int64_t left,
                             std::int64_t right) {
  check(x.rank() == 3, "pad_frames_reflect: input must be rank 3");
  check(left >= 0 && right >= 0, "pad_frames_reflect: negative pad");
  const std::int64_t B = x.dim(0), N = x.dim(1), K = x.dim(2);
  check(N >= 2 || (left == 0 && right == 0),
        "pad_frames_reflect: need at least two frames to reflect");
  const std::int64_t No = N + left + right;
  auto src_of = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(No));
  for (std::int64_t j = 0; j < No; ++j) {
    std::int64_t s = j - left;
    while (s < 0 || s >= N) s = s < 0 ? -s : 2 * N - 2 - s;
    (*src_of)[static_cast<std::size_t>(j)] = s;
  }
  Tensor<T> out = Tensor<T>::zeros({B, No, K});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t j = 0; j < No; ++j)
      std::copy_n(x.data() + (b * N + (*src_of)[static_cast<std::size_t>(j)]) * K,
                  K, out.data() + (b * No + j) * K);
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi, src_of, B, N, K, No] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t j = 0; j < No; ++j) {
          const std::int64_t s = (*src_of)[static_cast<std::size_t>(j)];
          for (std::int64_t k = 0; k < K; ++k)
            xi->grad[static_cast<std::size_t>((b * N + s) * K + k)] +=
                (*og)[static_cast<std::size_t>((b * No + j) * K + k)];
        }
    });
  }
  return out;
}

}  // namespace rcunet
