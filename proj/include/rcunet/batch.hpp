// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcunet/arch.hpp"
#include "rcunet/corpus.hpp"
#include "rcunet/dsp.hpp"
#include "rcunet/tensor_ops.hpp"

namespace rcunet {

// One utterance prepared for the network: the mixture log-mel as input and
// either the (clean, noise) log-mel pair (mapping) or the ideal ratio mask
// over linear mel magnitudes (irm) as target.
template <class T>
struct TrainItem {
  std::string id;
  Tensor<T> input;   // [64, N, 1]
  Tensor<T> target;  // [64, N, 2] mapping | [64, N, 1] irm
  std::int64_t frames() const { return input.dim(1); }
};

namespace detail {

// Copies a column-major [64, N] matrix into channel c of a [64, N, C] tensor.
template <class T>
void fill_channel(Tensor<T>& t, const Eigen::MatrixXd& m, std::int64_t c) {
  const std::int64_t B = t.dim(0), N = t.dim(1), C = t.dim(2);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t n = 0; n < N; ++n)
      t.data()[(b * N + n) * C + c] = static_cast<T>(m(b, n));
}

}  // namespace detail

template <class T>
TrainItem<T> make_train_item(const Utterance& u, const MelBank& bank,
                             OutputMode mode) {
  TrainItem<T> item;
  item.id = u.id;
  const Spectrogram mix = features(u.mixture, bank);
  const std::int64_t N = mix.frames();
  item.input = Tensor<T>::zeros({64, N, 1});
  detail::fill_channel(item.input, mix.logmel, 0);

  if (mode == OutputMode::mapping) {
    item.target = Tensor<T>::zeros({64, N, 2});
    detail::fill_channel(item.target, features(u.clean, bank).logmel, 0);
    detail::fill_channel(item.target, features(u.noise, bank).logmel, 1);
  } else {
    // Mask over linear mel magnitudes; 0/0 (both silent) maps to 0.
    Eigen::MatrixXd s = bank.weights * stft(u.clean.samples).cwiseAbs();
    Eigen::MatrixXd n = bank.weights * stft(u.noise.samples).cwiseAbs();
    Eigen::MatrixXd m(64, N);
    for (std::int64_t b = 0; b < 64; ++b)
      for (std::int64_t f = 0; f < N; ++f) {
        const double ss = s(b, f) * s(b, f), nn = n(b, f) * n(b, f);
        m(b, f) = ss + nn > 0.0 ? std::sqrt(ss / (ss + nn)) : 0.0;
      }
    item.target = Tensor<T>::zeros({64, N, 1});
    detail::fill_channel(item.target, m, 0);
  }
  return item;
}

// A shuffled group of items padded (logically) to the longest member. Masks
// flag the valid frames of each item within the padded length; the loss and
// every metric ignore padded frames entirely.
template <class T>
struct Batch {
  std::vector<std::size_t> items;     // indices into the epoch's item list
  std::int64_t max_frames = 0;
  std::vector<std::vector<T>> masks;  // per item, length max_frames, 1=valid
  std::int64_t valid_cells = 0;       // sum over items of 64 * frames
};

// Seeded shuffle of the items, grouped into batches of at most batch_size.
template <class T>
std::vector<Batch<T>> make_batches(const std::vector<TrainItem<T>>& items,
                                   std::int64_t batch_size, Rng& rng) {
  check(batch_size >= 1, "make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<Batch<T>> batches;
  for (std::size_t at = 0; at < order.size();) {
    Batch<T> b;
    const std::size_t take = std::min(static_cast<std::size_t>(batch_size),
                                      order.size() - at);
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t idx = order[at + i];
      b.items.push_back(idx);
      b.max_frames = std::max(b.max_frames, items[idx].frames());
      b.valid_cells += 64 * items[idx].frames();
    }
    for (std::size_t i = 0; i < take; ++i) {
      std::vector<T> mask(static_cast<std::size_t>(b.max_frames), T(0));
      const auto valid = static_cast<std::size_t>(items[b.items[i]].frames());
      std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(valid),
                T(1));
      b.masks.push_back(std::move(mask));
    }
    batches.push_back(std::move(b));
    at += take;
  }
  return batches;
}

// Masked L1 over the batch: sum of absolute errors on valid frames divided by
// the count of valid (band, frame) cells. In mapping mode both channels share
// the normalizer, so the value is mean|S_hat-S| + mean|N_hat-N|; a prediction
// off by +1 everywhere in one channel scores exactly 1. Each output may be at
// its item's true length or padded to max_frames; padded frames are ignored.
template <class T>
Tensor<T> compute_loss(const std::vector<Tensor<T>>& outs, const Batch<T>& batch,
                       const std::vector<TrainItem<T>>& items) {
  check(outs.size() == batch.items.size(),
        cat("compute_loss: ", outs.size(), " outputs for a batch of ",
            batch.items.size()));
  Tensor<T> total = Tensor<T>::zeros({1});
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const TrainItem<T>& item = items[batch.items[i]];
    const std::int64_t L = outs[i].dim(1);
    check(L == item.frames() || L == batch.max_frames,
          cat("compute_loss: output of item ", item.id, " has ", L,
              " frames; expected ", item.frames(), " or padded ",
              batch.max_frames));
    Tensor<T> target = item.target;
    if (L != item.frames()) {
      // Zero-pad the target up to the batch length; the mask hides the tail.
      target = Tensor<T>::zeros({item.target.dim(0), L, item.target.dim(2)});
      const std::int64_t B = item.target.dim(0), N = item.frames(),
                         C = item.target.dim(2);
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t c = 0; c < C; ++c)
            target.data()[(b * L + n) * C + c] =
                item.target.data()[(b * N + n) * C + c];
    }
    std::vector<T> mask(batch.masks[i].begin(),
                        batch.masks[i].begin() + static_cast<std::ptrdiff_t>(L));
    total = add(total, masked_l1_sum3(outs[i], target, mask));
  }
  Tensor<T> norm = Tensor<T>::scalar(T(1) / static_cast<T>(batch.valid_cells));
  return mul(total, norm);
}

}  // namespace rcunet
