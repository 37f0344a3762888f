// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Mask-predicting baseline networks: a fully connected net and a bidirectional
// LSTM stack, both fed sliding 23-frame windows of the log-mel spectrogram and
// trained toward the ideal ratio mask of the center frame.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rcunet/optim.hpp"
#include "rcunet/rnn.hpp"
#include "rcunet/tensor_ops.hpp"

namespace rcunet {

inline constexpr std::int64_t kWindowFrames = 23;  // 11 context frames per side
inline constexpr std::int64_t kWindowContext = 11;

// [bands, frames, 1] -> [frames, window*bands]: one flattened window per
// frame, edge frames replicated past the boundaries. Window w for frame n is
// laid out frame-major: [y(n-11), y(n-10), ..., y(n+11)].
template <typename T>
Tensor<T> fcln_windows(const Tensor<T>& y, std::int64_t window = kWindowFrames) {
  check(y.rank() == 3 && y.dim(2) == 1, "fcln_windows: input must be [bands, frames, 1]");
  check(window % 2 == 1, "fcln_windows: window must be odd");
  const std::int64_t B = y.dim(0), N = y.dim(1), ctx = window / 2;
  Tensor<T> out = Tensor<T>::zeros({N, window * B});
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t s = 0; s < window; ++s) {
      const std::int64_t src = std::clamp<std::int64_t>(n - ctx + s, 0, N - 1);
      for (std::int64_t b = 0; b < B; ++b)
        out.data()[(n * window + s) * B + b] = y.data()[(b * N + src) * 1];
    }
  return out;
}

// [bands, frames, 1] -> [window, frames, bands]: the same windows shaped as
// sequences so a recurrence sweeps the window axis with frames batched.
template <typename T>
Tensor<T> rnn_windows(const Tensor<T>& y, std::int64_t window = kWindowFrames) {
  check(y.rank() == 3 && y.dim(2) == 1, "rnn_windows: input must be [bands, frames, 1]");
  check(window % 2 == 1, "rnn_windows: window must be odd");
  const std::int64_t B = y.dim(0), N = y.dim(1), ctx = window / 2;
  Tensor<T> out = Tensor<T>::zeros({window, N, B});
  for (std::int64_t s = 0; s < window; ++s)
    for (std::int64_t n = 0; n < N; ++n) {
      const std::int64_t src = std::clamp<std::int64_t>(n - ctx + s, 0, N - 1);
      for (std::int64_t b = 0; b < B; ++b)
        out.data()[(s * N + n) * B + b] = y.data()[b * N + src];
    }
  return out;
}

// Ideal ratio mask on linear mel magnitudes: sqrt(S^2 / (S^2 + N^2)), with
// silent bins (both zero) mapped to zero. Target-side only; not recorded.
template <typename T>
Tensor<T> irm(const Tensor<T>& s_mag, const Tensor<T>& n_mag) {
  check(s_mag.shape() == n_mag.shape(), "irm: shape mismatch");
  Tensor<T> out = Tensor<T>::zeros(s_mag.shape());
  for (std::size_t i = 0; i < out.value().size(); ++i) {
    const T s2 = s_mag.value()[i] * s_mag.value()[i];
    const T n2 = n_mag.value()[i] * n_mag.value()[i];
    out.value()[i] = s2 + n2 > T(0) ? std::sqrt(s2 / (s2 + n2)) : T(0);
  }
  return out;
}

// Fully connected mask predictor: window*bands -> hidden x4 (ELU) -> bands,
// linear output.
template <typename T>
class Fcln {
 public:
  Fcln(ParameterStore<T>& params, Rng& rng, std::int64_t bands = 64,
       std::int64_t window = kWindowFrames, std::int64_t hidden = 512,
       std::int64_t hidden_layers = 4)
      : bands_(bands), window_(window) {
    std::int64_t in = window * bands;
    for (std::int64_t l = 0; l < hidden_layers; ++l) {
      const std::string base = cat("fc", l + 1);
      w_.push_back(detail::add_param<T>(params, base + ".w", {in, hidden}, in, rng));
      b_.push_back(detail::add_param<T>(params, base + ".b", {hidden}, in, rng));
      in = hidden;
    }
    w_.push_back(detail::add_param<T>(params, "out.w", {in, bands}, in, rng));
    b_.push_back(detail::add_param<T>(params, "out.b", {bands}, in, rng));
  }

  // windows: [frames, window*bands] -> masks [frames, bands].
  Tensor<T> forward(const Tensor<T>& windows) {
    check(windows.rank() == 2 && windows.dim(1) == window_ * bands_,
          "fcln: windows must be [frames, window*bands]");
    Tensor<T> h = windows;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      h = add_rowvec(matmul(h, w_[l]), b_[l]);
      if (l + 1 < w_.size()) h = elu(h);
    }
    return h;
  }

  std::int64_t bands() const { return bands_; }
  std::int64_t window() const { return window_; }

 private:
  std::int64_t bands_, window_;
  std::vector<Tensor<T>> w_, b_;
};

// Stacked bidirectional LSTM mask predictor: each layer runs forward and
// backward LSTMs over the window axis and concatenates them; the center
// step's features feed a linear output. All LSTM weights are clip targets.
template <typename T>
class RnnStack {
 public:
  RnnStack(ParameterStore<T>& params, Rng& rng, std::int64_t bands = 64,
           std::int64_t window = kWindowFrames, std::int64_t hidden = 512,
           std::int64_t num_layers = 4)
      : bands_(bands), window_(window) {
    std::int64_t in = bands;
    for (std::int64_t l = 0; l < num_layers; ++l) {
      Layer layer;
      layer.fw = make_lstm(params, cat("lstm", l + 1, ".f"), in, hidden, rng);
      layer.bw = make_lstm(params, cat("lstm", l + 1, ".b"), in, hidden, rng);
      layers_.push_back(layer);
      in = 2 * hidden;
    }
    head_w_ = detail::add_param<T>(params, "out.w", {in, bands}, in, rng);
    head_b_ = detail::add_param<T>(params, "out.b", {bands}, in, rng);
  }

  // windows: [window, frames, bands] -> masks [frames, bands].
  Tensor<T> forward(const Tensor<T>& windows) {
    check(windows.rank() == 3 && windows.dim(0) == window_ && windows.dim(2) == bands_,
          "rnn: windows must be [window, frames, bands]");
    Tensor<T> x = windows;
    Tensor<T> none;
    for (auto& layer : layers_) {
      Tensor<T> f = lstm_seq(x, layer.fw, none, none, false);
      Tensor<T> b = lstm_seq(x, layer.bw, none, none, true);
      x = concat_feat(f, b);
    }
    Tensor<T> center = slice_axis0(x, window_ / 2);
    return add_rowvec(matmul(center, head_w_), head_b_);
  }

  std::int64_t bands() const { return bands_; }
  std::int64_t window() const { return window_; }

 private:
  struct Layer {
    LstmWeights<T> fw, bw;
  };

  static LstmWeights<T> make_lstm(ParameterStore<T>& params, const std::string& name,
                                  std::int64_t in_ch, std::int64_t hidden, Rng& rng) {
    LstmWeights<T> w;
    w.w_ih = detail::add_param<T>(params, name + ".w_ih", {in_ch, 4 * hidden}, in_ch, rng, true);
    w.w_hh = Tensor<T>::zeros({hidden, 4 * hidden});
    fill_orthogonal_blocks(w.w_hh, rng);
    params.add(name + ".w_hh", w.w_hh, true);
    w.b = Tensor<T>::zeros({4 * hidden});
    params.add(name + ".b", w.b, true);
    return w;
  }

  std::int64_t bands_, window_;
  std::vector<Layer> layers_;
  Tensor<T> head_w_, head_b_;
};

}  // namespace rcunet
