// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <memory>
#include <vector>

#include "rcunet/tensor_ops.hpp"

namespace rcunet {

// Recurrent layers are fused ops: one tape record per sequence with a
// hand-derived backward-through-time pass. Building the graph step by step
// from primitive ops would work but costs far more time and memory on long
// utterances.

// ---------------------------------------------------------------------------
// Gated recurrent unit.
//
//   z = sigmoid(x W_z + h_prev U_z + b_z)
//   r = sigmoid(x W_r + h_prev U_r + b_r)
//   c = tanh   (x W_c + (r . h_prev) U_c + b_c)
//   h = z . h_prev + (1 - z) . c
//
// One bias per gate. Parameters per direction: 3*(K*H + H*H + H).
// ---------------------------------------------------------------------------

template <class T>
struct GruWeights {
  Tensor<T> w_ih;   // [K, 3H], column blocks [z | r | c]
  Tensor<T> w_hzr;  // [H, 2H], column blocks [z | r]
  Tensor<T> w_hc;   // [H, H]
  Tensor<T> b;      // [3H]

  std::int64_t input() const { return w_ih.dim(0); }
  std::int64_t hidden() const { return w_hc.dim(0); }
};

namespace detail {

template <class T>
struct GruSaved {
  std::vector<T> xp;       // [T,R,3H] input projections plus bias
  std::vector<T> z, r, c;  // [T,R,H] post-activation gate values
};

}  // namespace detail

// Runs a GRU over axis 0 of x ([steps, rows, K]) with every row as an
// independent sequence. The output holds the hidden state at each input
// position; with reverse=true the scan runs from the last step to the first
// (output stays aligned with input positions). h0 may be undefined (zeros).
template <class T>
Tensor<T> gru_seq(const Tensor<T>& x, const GruWeights<T>& w,
                  const Tensor<T>& h0, bool reverse) {
  check(x.rank() == 3, "gru_seq: input must be [steps, rows, features]");
  const std::int64_t S = x.dim(0), R = x.dim(1), K = x.dim(2);
  const std::int64_t H = w.hidden();
  check(w.w_ih.rank() == 2 && w.w_ih.dim(0) == K && w.w_ih.dim(1) == 3 * H,
        cat("gru_seq: w_ih must be [", K, ",", 3 * H, "]"));
  check(w.w_hzr.rank() == 2 && w.w_hzr.dim(0) == H && w.w_hzr.dim(1) == 2 * H,
        "gru_seq: w_hzr must be [H,2H]");
  check(w.b.rank() == 1 && w.b.dim(0) == 3 * H, "gru_seq: b must be [3H]");
  if (h0.defined())
    check(h0.rank() == 2 && h0.dim(0) == R && h0.dim(1) == H,
          "gru_seq: h0 must be [rows, H]");

  auto saved = std::make_shared<detail::GruSaved<T>>();
  saved->xp.resize(static_cast<std::size_t>(S * R * 3 * H));
  saved->z.resize(static_cast<std::size_t>(S * R * H));
  saved->r.resize(static_cast<std::size_t>(S * R * H));
  saved->c.resize(static_cast<std::size_t>(S * R * H));

  // Input projections for every step in one product.
  {
    MapCM<T> X(x.data(), S * R, K), W(w.w_ih.data(), K, 3 * H);
    MapM<T> XP(saved->xp.data(), S * R, 3 * H);
    XP.noalias() = X * W;
    MapCM<T> bv(w.b.data(), 1, 3 * H);
    XP.rowwise() += bv.row(0);
  }

  Tensor<T> out = Tensor<T>::zeros({S, R, H});
  std::vector<T> zeros_h0;
  const T* h0p = nullptr;
  if (h0.defined()) {
    h0p = h0.data();
  } else {
    zeros_h0.assign(static_cast<std::size_t>(R * H), T(0));
    h0p = zeros_h0.data();
  }

  std::vector<T> zr(static_cast<std::size_t>(R * 2 * H));
  std::vector<T> rh(static_cast<std::size_t>(R * H));
  std::vector<T> a(static_cast<std::size_t>(R * H));
  MapCM<T> Whzr(w.w_hzr.data(), H, 2 * H), Whc(w.w_hc.data(), H, H);

  for (std::int64_t i = 0; i < S; ++i) {
    const std::int64_t t = reverse ? S - 1 - i : i;
    const std::int64_t tp = reverse ? t + 1 : t - 1;
    const T* hprev = i == 0 ? h0p : out.data() + tp * R * H;
    MapCM<T> Hp(hprev, R, H);
    MapCM<T> XPt(saved->xp.data() + t * R * 3 * H, R, 3 * H);
    MapM<T> ZR(zr.data(), R, 2 * H);
    ZR.noalias() = XPt.leftCols(2 * H);
    ZR.noalias() += Hp * Whzr;
    T* zt = saved->z.data() + t * R * H;
    T* rt = saved->r.data() + t * R * H;
    T* ct = saved->c.data() + t * R * H;
    for (std::int64_t q = 0; q < R; ++q)
      for (std::int64_t j = 0; j < H; ++j) {
        zt[q * H + j] = T(1) / (T(1) + std::exp(-zr[static_cast<std::size_t>(
                                    q * 2 * H + j)]));
        rt[q * H + j] = T(1) / (T(1) + std::exp(-zr[static_cast<std::size_t>(
                                    q * 2 * H + H + j)]));
        rh[static_cast<std::size_t>(q * H + j)] =
            rt[q * H + j] * hprev[q * H + j];
      }
    MapM<T> A(a.data(), R, H);
    MapCM<T> RH(rh.data(), R, H);
    A.noalias() = XPt.rightCols(H);
    A.noalias() += RH * Whc;
    T* ht = out.data() + t * R * H;
    for (std::int64_t q = 0; q < R * H; ++q) {
      ct[q] = std::tanh(a[static_cast<std::size_t>(q)]);
      ht[q] = zt[q] * hprev[q] + (T(1) - zt[q]) * ct[q];
    }
  }

  if (detail::track<T>({&x, &w.w_ih, &w.w_hzr, &w.w_hc, &w.b, &h0})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    auto wih = w.w_ih.impl(), whzr = w.w_hzr.impl(), whc = w.w_hc.impl(),
         bi = w.b.impl();
    auto h0i = h0.defined() ? h0.impl() : nullptr;
    Tape<T>::current()->record([=] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      MapCM<T> Whzr(whzr->value.data(), H, 2 * H), Whc(whc->value.data(), H, H);
      std::vector<T> dxp(static_cast<std::size_t>(S * R * 3 * H), T(0));
      std::vector<T> dh(static_cast<std::size_t>(R * H), T(0));
      std::vector<T> dzr(static_cast<std::size_t>(R * 2 * H));
      std::vector<T> drh(static_cast<std::size_t>(R * H));
      std::vector<T> rh(static_cast<std::size_t>(R * H));
      std::vector<T> zeros_h0;
      const T* h0p = h0i ? h0i->value.data() : nullptr;
      if (!h0p) {
        zeros_h0.assign(static_cast<std::size_t>(R * H), T(0));
        h0p = zeros_h0.data();
      }
      const bool need_whzr = whzr->requires_grad;
      const bool need_whc = whc->requires_grad;
      for (std::int64_t i = S - 1; i >= 0; --i) {
        const std::int64_t t = reverse ? S - 1 - i : i;
        const std::int64_t tp = reverse ? t + 1 : t - 1;
        const T* hprev = i == 0 ? h0p : oi->value.data() + tp * R * H;
        const T* zt = saved->z.data() + t * R * H;
        const T* rt = saved->r.data() + t * R * H;
        const T* ct = saved->c.data() + t * R * H;
        // Accumulated output gradient at this position plus the carry.
        for (std::int64_t q = 0; q < R * H; ++q)
          dh[static_cast<std::size_t>(q)] +=
              (*og)[static_cast<std::size_t>(t * R * H + q)];
        // Through h = z h_prev + (1-z) c, then c = tanh(a).
        T* dxpt = dxp.data() + t * R * 3 * H;
        for (std::int64_t q = 0; q < R; ++q)
          for (std::int64_t j = 0; j < H; ++j) {
            const std::int64_t e = q * H + j;
            const T dhv = dh[static_cast<std::size_t>(e)];
            const T dz = dhv * (hprev[e] - ct[e]);
            const T dc = dhv * (T(1) - zt[e]);
            const T da = dc * (T(1) - ct[e] * ct[e]);
            dxpt[q * 3 * H + 2 * H + j] = da;  // candidate block of xp
            dzr[static_cast<std::size_t>(q * 2 * H + j)] =
                dz * zt[e] * (T(1) - zt[e]);
            rh[static_cast<std::size_t>(e)] = rt[e] * hprev[e];
          }
        // d(rh) = da * Whc^T; dW_hc += rh^T da.
        {
          MapCM<T> DXPt(dxpt, R, 3 * H);
          MapM<T> DRH(drh.data(), R, H);
          DRH.noalias() = DXPt.rightCols(H) * Whc.transpose();
          if (need_whc) {
            whc->ensure_grad();
            MapM<T> dWhc(whc->grad.data(), H, H);
            MapCM<T> RH(rh.data(), R, H);
            dWhc.noalias() += RH.transpose() * DXPt.rightCols(H);
          }
        }
        for (std::int64_t q = 0; q < R; ++q)
          for (std::int64_t j = 0; j < H; ++j) {
            const std::int64_t e = q * H + j;
            const T dr = drh[static_cast<std::size_t>(e)] * hprev[e];
            dzr[static_cast<std::size_t>(q * 2 * H + H + j)] =
                dr * rt[e] * (T(1) - rt[e]);
          }
        // Copy gate pre-activation grads into xp and push into h_prev.
        for (std::int64_t q = 0; q < R; ++q)
          for (std::int64_t j = 0; j < 2 * H; ++j)
            dxpt[q * 3 * H + j] = dzr[static_cast<std::size_t>(q * 2 * H + j)];
        {
          MapCM<T> DZR(dzr.data(), R, 2 * H);
          MapCM<T> Hp(hprev, R, H);
          if (need_whzr) {
            whzr->ensure_grad();
            MapM<T> dWhzr(whzr->grad.data(), H, 2 * H);
            dWhzr.noalias() += Hp.transpose() * DZR;
          }
          // New carry: direct term z.dh + r-weighted candidate + gate terms.
          for (std::int64_t q = 0; q < R * H; ++q) {
            const std::size_t e = static_cast<std::size_t>(q);
            dh[e] = dh[e] * saved->z[static_cast<std::size_t>(t * R * H + q)] +
                    drh[e] * saved->r[static_cast<std::size_t>(t * R * H + q)];
          }
          MapM<T> DH(dh.data(), R, H);
          DH.noalias() += DZR * Whzr.transpose();
        }
      }
      if (h0i && h0i->requires_grad) {
        h0i->ensure_grad();
        for (std::size_t q = 0; q < dh.size(); ++q) h0i->grad[q] += dh[q];
      }
      MapCM<T> DXP(dxp.data(), S * R, 3 * H);
      if (wih->requires_grad) {
        wih->ensure_grad();
        MapCM<T> X(xi->value.data(), S * R, K);
        MapM<T> dW(wih->grad.data(), K, 3 * H);
        dW.noalias() += X.transpose() * DXP;
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        // Fixed-order accumulation keeps reruns bitwise reproducible.
        T* db = bi->grad.data();
        const T* dxpp = dxp.data();
        for (std::int64_t r = 0; r < S * R; ++r)
          for (std::int64_t c = 0; c < 3 * H; ++c)
            db[c] += dxpp[r * 3 * H + c];
      }
      if (xi->requires_grad) {
        xi->ensure_grad();
        MapCM<T> W(wih->value.data(), K, 3 * H);
        MapM<T> dX(xi->grad.data(), S * R, K);
        dX.noalias() += DXP * W.transpose();
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// LSTM with the standard four gates:
//   i,f,o = sigmoid(...), g = tanh(...)
//   c = f . c_prev + i . g,   h = o . tanh(c)
// Parameters per direction: 4*(K*H + H*H + H).
// ---------------------------------------------------------------------------

template <class T>
struct LstmWeights {
  Tensor<T> w_ih;  // [K, 4H], column blocks [i | f | g | o]
  Tensor<T> w_hh;  // [H, 4H]
  Tensor<T> b;     // [4H]

  std::int64_t input() const { return w_ih.dim(0); }
  std::int64_t hidden() const { return w_hh.dim(0); }
};

namespace detail {

template <class T>
struct LstmSaved {
  std::vector<T> gates;  // [S,R,4H] post-activation
  std::vector<T> c;      // [S,R,H] cell states
};

}  // namespace detail

template <class T>
Tensor<T> lstm_seq(const Tensor<T>& x, const LstmWeights<T>& w,
                   const Tensor<T>& h0, const Tensor<T>& c0, bool reverse) {
  check(x.rank() == 3, "lstm_seq: input must be [steps, rows, features]");
  const std::int64_t S = x.dim(0), R = x.dim(1), K = x.dim(2);
  const std::int64_t H = w.hidden();
  check(w.w_ih.rank() == 2 && w.w_ih.dim(0) == K && w.w_ih.dim(1) == 4 * H,
        cat("lstm_seq: w_ih must be [", K, ",", 4 * H, "]"));
  check(w.b.rank() == 1 && w.b.dim(0) == 4 * H, "lstm_seq: b must be [4H]");
  if (h0.defined())
    check(h0.rank() == 2 && h0.dim(0) == R && h0.dim(1) == H,
          "lstm_seq: h0 must be [rows, H]");
  if (c0.defined())
    check(c0.rank() == 2 && c0.dim(0) == R && c0.dim(1) == H,
          "lstm_seq: c0 must be [rows, H]");

  auto saved = std::make_shared<detail::LstmSaved<T>>();
  saved->gates.resize(static_cast<std::size_t>(S * R * 4 * H));
  saved->c.resize(static_cast<std::size_t>(S * R * H));

  // xp doubles as the gate buffer: projections first, activations in place.
  {
    MapCM<T> X(x.data(), S * R, K), W(w.w_ih.data(), K, 4 * H);
    MapM<T> XP(saved->gates.data(), S * R, 4 * H);
    XP.noalias() = X * W;
    MapCM<T> bv(w.b.data(), 1, 4 * H);
    XP.rowwise() += bv.row(0);
  }

  Tensor<T> out = Tensor<T>::zeros({S, R, H});
  std::vector<T> zeros_state(static_cast<std::size_t>(R * H), T(0));
  const T* h0p = h0.defined() ? h0.data() : zeros_state.data();
  const T* c0p = c0.defined() ? c0.data() : zeros_state.data();
  MapCM<T> Whh(w.w_hh.data(), H, 4 * H);

  for (std::int64_t i = 0; i < S; ++i) {
    const std::int64_t t = reverse ? S - 1 - i : i;
    const std::int64_t tp = reverse ? t + 1 : t - 1;
    const T* hprev = i == 0 ? h0p : out.data() + tp * R * H;
    const T* cprev = i == 0 ? c0p : saved->c.data() + tp * R * H;
    T* gt = saved->gates.data() + t * R * 4 * H;
    {
      MapCM<T> Hp(hprev, R, H);
      MapM<T> G(gt, R, 4 * H);
      G.noalias() += Hp * Whh;
    }
    T* ct = saved->c.data() + t * R * H;
    T* ht = out.data() + t * R * H;
    for (std::int64_t q = 0; q < R; ++q)
      for (std::int64_t j = 0; j < H; ++j) {
        T* g = gt + q * 4 * H;
        const std::int64_t e = q * H + j;
        const T gi = T(1) / (T(1) + std::exp(-g[j]));
        const T gf = T(1) / (T(1) + std::exp(-g[H + j]));
        const T gg = std::tanh(g[2 * H + j]);
        const T go = T(1) / (T(1) + std::exp(-g[3 * H + j]));
        g[j] = gi;
        g[H + j] = gf;
        g[2 * H + j] = gg;
        g[3 * H + j] = go;
        ct[e] = gf * cprev[e] + gi * gg;
        ht[e] = go * std::tanh(ct[e]);
      }
  }

  if (detail::track<T>({&x, &w.w_ih, &w.w_hh, &w.b, &h0, &c0})) {
    out.set_requires_grad(true);
    auto xi = x.impl(), oi = out.impl();
    auto wih = w.w_ih.impl(), whh = w.w_hh.impl(), bi = w.b.impl();
    auto h0i = h0.defined() ? h0.impl() : nullptr;
    auto c0i = c0.defined() ? c0.impl() : nullptr;
    Tape<T>::current()->record([=] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      MapCM<T> Whh(whh->value.data(), H, 4 * H);
      std::vector<T> dg_all(static_cast<std::size_t>(S * R * 4 * H), T(0));
      std::vector<T> dh(static_cast<std::size_t>(R * H), T(0));
      std::vector<T> dc(static_cast<std::size_t>(R * H), T(0));
      std::vector<T> zeros_state(static_cast<std::size_t>(R * H), T(0));
      const T* h0p = h0i ? h0i->value.data() : zeros_state.data();
      const T* c0p = c0i ? c0i->value.data() : zeros_state.data();
      for (std::int64_t i = S - 1; i >= 0; --i) {
        const std::int64_t t = reverse ? S - 1 - i : i;
        const std::int64_t tp = reverse ? t + 1 : t - 1;
        const T* hprev = i == 0 ? h0p : oi->value.data() + tp * R * H;
        const T* cprev = i == 0 ? c0p : saved->c.data() + tp * R * H;
        const T* gt = saved->gates.data() + t * R * 4 * H;
        const T* ct = saved->c.data() + t * R * H;
        T* dgt = dg_all.data() + t * R * 4 * H;
        for (std::int64_t q = 0; q < R; ++q)
          for (std::int64_t j = 0; j < H; ++j) {
            const std::int64_t e = q * H + j;
            const T* g = gt + q * 4 * H;
            const T gi = g[j], gf = g[H + j], gg = g[2 * H + j],
                    go = g[3 * H + j];
            const T tc = std::tanh(ct[e]);
            const T dhv = dh[static_cast<std::size_t>(e)] +
                          (*og)[static_cast<std::size_t>(t * R * H + e)];
            const T dcv = dc[static_cast<std::size_t>(e)] +
                          dhv * go * (T(1) - tc * tc);
            T* d = dgt + q * 4 * H;
            d[j] = dcv * gg * gi * (T(1) - gi);
            d[H + j] = dcv * cprev[e] * gf * (T(1) - gf);
            d[2 * H + j] = dcv * gi * (T(1) - gg * gg);
            d[3 * H + j] = dhv * tc * go * (T(1) - go);
            dc[static_cast<std::size_t>(e)] = dcv * gf;
            dh[static_cast<std::size_t>(e)] = T(0);  // refilled below
          }
        MapCM<T> DG(dgt, R, 4 * H);
        if (whh->requires_grad) {
          whh->ensure_grad();
          MapCM<T> Hp(hprev, R, H);
          MapM<T> dWhh(whh->grad.data(), H, 4 * H);
          dWhh.noalias() += Hp.transpose() * DG;
        }
        MapM<T> DH(dh.data(), R, H);
        DH.noalias() = DG * Whh.transpose();
      }
      if (h0i && h0i->requires_grad) {
        h0i->ensure_grad();
        for (std::size_t q = 0; q < dh.size(); ++q) h0i->grad[q] += dh[q];
      }
      if (c0i && c0i->requires_grad) {
        c0i->ensure_grad();
        for (std::size_t q = 0; q < dc.size(); ++q) c0i->grad[q] += dc[q];
      }
      MapCM<T> DG(dg_all.data(), S * R, 4 * H);
      if (wih->requires_grad) {
        wih->ensure_grad();
        MapCM<T> X(xi->value.data(), S * R, K);
        MapM<T> dW(wih->grad.data(), K, 4 * H);
        dW.noalias() += X.transpose() * DG;
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        // Fixed-order accumulation keeps reruns bitwise reproducible.
        T* db = bi->grad.data();
        const T* dgp = dg_all.data();
        for (std::int64_t r = 0; r < S * R; ++r)
          for (std::int64_t c = 0; c < 4 * H; ++c)
            db[c] += dgp[r * 4 * H + c];
      }
      if (xi->requires_grad) {
        xi->ensure_grad();
        MapCM<T> W(wih->value.data(), K, 4 * H);
        MapM<T> dX(xi->grad.data(), S * R, K);
        dX.noalias() += DG * W.transpose();
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bidirectional weight-sharing recurrence over one axis of a [bands, frames,
// channels] feature map. One GRU weight set drives both sweep directions;
// rows of the other axis are batched. Output features are the forward and
// backward hidden states concatenated: [B, N, 2u] for u units per direction.
// ---------------------------------------------------------------------------

enum class Axis { time, freq };

// Bidirectional weight-sharing recurrence: sweeps one spatial axis in both
// directions (separate weights per direction), sharing each direction's
// weights across every slice of the other axis. Output is [B,N,2H].
template <typename T>
Tensor<T> bwr(const Tensor<T>& x, Axis axis, const GruWeights<T>& fw,
              const GruWeights<T>& bw) {
  check(x.rank() == 3, "bwr: input must be [bands, frames, channels]");
  Tensor<T> seq = axis == Axis::time ? permute01(x) : x;
  Tensor<T> none;
  Tensor<T> fwd = gru_seq(seq, fw, none, false);
  Tensor<T> bwd = gru_seq(seq, bw, none, true);
  Tensor<T> both = concat_feat(fwd, bwd);
  return axis == Axis::time ? permute01(both) : both;
}

}  // namespace rcunet
