// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>

#include "rcunet/batch.hpp"
#include "rcunet/dsp.hpp"
#include "rcunet/model.hpp"

namespace rcunet {

// Full enhancement path: noisy waveform -> log-mel features -> network ->
// log-mel estimate -> waveform, reusing the noisy phase. Mapping checkpoints
// emit the clean log-mel directly (channel 0; channel 1 is the noise
// estimate, used only by the loss). IRM checkpoints emit a mask that is
// clamped to [0, 1] and applied to the noisy linear mel magnitudes.
// Runs in eval mode outside any tape, so nothing is recorded or updated.
template <class T>
Waveform enhance_waveform(UNet<T>& net, const MelBank& bank,
                          const Waveform& noisy) {
  const Spectrogram sp = features(noisy, bank);
  const std::int64_t N = sp.frames();
  Tensor<T> x = Tensor<T>::zeros({64, N, 1});
  detail::fill_channel(x, sp.logmel, 0);
  Tensor<T> out = net.forward(x, /*train=*/false);

  Eigen::MatrixXd logmel_hat(64, N);
  const std::int64_t C = out.dim(2);
  if (net.spec().mode == OutputMode::mapping) {
    for (std::int64_t b = 0; b < 64; ++b)
      for (std::int64_t n = 0; n < N; ++n)
        logmel_hat(b, n) = static_cast<double>(out.data()[(b * N + n) * C]);
  } else {
    for (std::int64_t b = 0; b < 64; ++b)
      for (std::int64_t n = 0; n < N; ++n) {
        const double m = std::clamp(
            static_cast<double>(out.data()[(b * N + n) * C]), 0.0, 1.0);
        logmel_hat(b, n) =
            std::log(std::max(m * std::exp(sp.logmel(b, n)), kLogFloor));
      }
  }
  return reconstruct(logmel_hat, sp.phase, bank,
                     static_cast<std::int64_t>(noisy.size()));
}

}  // namespace rcunet
