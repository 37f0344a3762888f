// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "rcunet/batch.hpp"
#include "rcunet/bss.hpp"
#include "rcunet/checkpoint.hpp"
#include "rcunet/corpus.hpp"
#include "rcunet/enhance.hpp"
#include "rcunet/model.hpp"

namespace rcunet {

// L1 regression training with Adam, per-epoch learning-rate decay, and
// snapshot selection by validation SDR on fully reconstructed waveforms.

struct TrainConfig {
  std::int64_t epochs = 100;
  std::int64_t batch_size = 15;
  double lr0 = 0.0;  // 0 resolves by architecture: 0.01 with RC pairs, else 0.001
  double lr_decay = 0.99;
  double val_fraction = 0.10;
  std::uint64_t seed = 1;
  double clip_threshold = 100.0;  // recurrent-weight gradient clamp
  std::string checkpoint_path;    // where the best snapshot is written
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_sdr = 0.0;  // NaN when the validation split is empty
  bool snapshot = false;
};

struct TrainState {
  std::int64_t epoch = 0;
  double lr_current = 0.0;
  double best_val_sdr = -kBssCapDb;
  std::string best_checkpoint_path;
  std::vector<EpochRecord> history;
};

inline double default_lr(const ArchSpec& spec) {
  for (const auto& block : spec.blocks)
    for (const auto& atom : block.atoms)
      if (std::holds_alternative<RcAtom>(atom)) return 0.01;
  return 0.001;
}

inline const char* kTrainLogHeader = "epoch,lr,train_loss,val_sdr,snapshot\n";

namespace detail {

// Stream-stable seed tags for the independent RNG uses inside train().
inline constexpr std::uint64_t kInitTag = 0x1;
inline constexpr std::uint64_t kSplitTag = 0x2;
inline constexpr std::uint64_t kEpochTagBase = 0x100;

}  // namespace detail

// Trains `spec` on the given utterances. 10% (val_fraction) of the corpus is
// held out before epoch 1; after every epoch the model is scored by mean BSS
// SDR of fully enhanced validation waveforms and snapshotted on improvement.
// With an empty validation split (tiny corpora) the snapshot rule falls back
// to the best training loss. `log` receives one CSV row per epoch.
template <class T>
TrainState train(const ArchSpec& spec, const std::vector<Utterance>& corpus,
                 const TrainConfig& cfg, std::ostream* log = nullptr) {
  validate(spec);
  check(!corpus.empty(), "train: empty corpus");
  check(cfg.epochs >= 1, "train: epochs must be >= 1");
  check(cfg.batch_size >= 1, "train: batch_size must be >= 1");
  check(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0,
        "train: val_fraction must lie in [0, 1)");
  check(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0,
        "train: lr_decay must lie in (0, 1]");
  check(!cfg.checkpoint_path.empty(), "train: checkpoint_path is required");
  const double lr0 = cfg.lr0 > 0.0 ? cfg.lr0 : default_lr(spec);
  check(lr0 > 0.0, "train: lr0 must be positive");

  const Rng root(cfg.seed);

  // Seeded holdout split, fixed before the first epoch.
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = root.fork(detail::kSplitTag);
  split_rng.shuffle(order);
  const auto val_n = static_cast<std::size_t>(
      std::floor(cfg.val_fraction * static_cast<double>(corpus.size())));
  std::vector<const Utterance*> val;
  for (std::size_t i = 0; i < val_n; ++i) val.push_back(&corpus[order[i]]);

  const MelBank bank = make_mel_bank();
  std::vector<TrainItem<T>> items;
  for (std::size_t i = val_n; i < order.size(); ++i)
    items.push_back(make_train_item<T>(corpus[order[i]], bank, spec.mode));
  check(!items.empty(), "train: validation split consumed every utterance");

  ParameterStore<T> params;
  Rng init_rng = root.fork(detail::kInitTag);
  UNet<T> net(spec, params, init_rng);

  CheckpointMeta meta;
  meta.rng_seed = cfg.seed;
  meta.arch_text = arch_to_text(spec);

  TrainState state;
  state.lr_current = lr0;
  double best_train_loss = std::numeric_limits<double>::infinity();
  if (log) *log << kTrainLogHeader;

  for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr0 * std::pow(cfg.lr_decay, static_cast<double>(epoch - 1));
    Rng epoch_rng = root.fork(detail::kEpochTagBase +
                              static_cast<std::uint64_t>(epoch));
    auto batches = make_batches(items, cfg.batch_size, epoch_rng);

    double epoch_abs = 0.0;
    std::int64_t epoch_cells = 0;
    for (const Batch<T>& batch : batches) {
      params.zero_grads();
      double batch_abs = 0.0;
      // Items run one at a time at their true length; seeding each backward
      // pass with 1/valid_cells accumulates exactly the gradient of
      // compute_loss over the whole batch.
      const T seed_w = T(1) / static_cast<T>(batch.valid_cells);
      for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const TrainItem<T>& item = items[batch.items[i]];
        Tape<T> tape;
        Tensor<T> out = net.forward(item.input, /*train=*/true);
        std::vector<T> ones(static_cast<std::size_t>(item.frames()), T(1));
        Tensor<T> item_sum = masked_l1_sum3(out, item.target, ones);
        batch_abs += static_cast<double>(item_sum.data()[0]);
        tape.backward(item_sum, seed_w);
      }
      if (!std::isfinite(batch_abs)) {
        std::string ids;
        for (std::size_t i : batch.items)
          ids += (ids.empty() ? "" : " ") + items[i].id;
        fail("train: non-finite loss at epoch ", epoch, " on batch [", ids, "]");
      }
      clip_gradients(params, static_cast<T>(cfg.clip_threshold));
      adam_step(params, static_cast<T>(lr));
      epoch_abs += batch_abs;
      epoch_cells += batch.valid_cells;
    }
    const double train_loss = epoch_abs / static_cast<double>(epoch_cells);

    double val_sdr = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      double sum = 0.0;
      for (const Utterance* u : val) {
        Waveform enhanced = enhance_waveform(net, bank, u->mixture);
        sum += bss_eval(enhanced.samples, u->clean.samples, u->noise.samples)
                   .sdr_db;
      }
      val_sdr = sum / static_cast<double>(val.size());
    }

    const bool improved = val.empty() ? train_loss < best_train_loss
                                      : val_sdr > state.best_val_sdr;
    if (improved) {
      best_train_loss = train_loss;
      if (!val.empty()) state.best_val_sdr = val_sdr;
      meta.epoch = epoch;
      meta.best_val_sdr = val.empty() ? -kBssCapDb : val_sdr;
      save_checkpoint(cfg.checkpoint_path, meta, params, net.buffers());
      state.best_checkpoint_path = cfg.checkpoint_path;
    }

    state.epoch = epoch;
    state.lr_current = lr * cfg.lr_decay;  // decayed after the epoch
    state.history.push_back({epoch, lr, train_loss, val_sdr, improved});
    if (log) {
      *log << epoch << ',' << std::setprecision(17) << lr << ',' << train_loss
           << ',' << val_sdr << ',' << (improved ? 1 : 0) << '\n';
      log->flush();
    }
  }
  return state;
}

}  // namespace rcunet
