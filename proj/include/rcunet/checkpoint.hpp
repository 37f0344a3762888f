// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "rcunet/common.hpp"
#include "rcunet/nn.hpp"
#include "rcunet/optim.hpp"

namespace rcunet {

// Binary model snapshot. All integers and floats are little-endian; tensor
// data is stored as 64-bit floats regardless of the in-memory scalar type.
//
//   magic   "RCKP"
//   u32     version (currently 1)
//   u64     rng_seed
//   i64     epoch
//   f64     best_val_sdr
//   string  arch text (u32 length + bytes; line 1 carries the output mode)
//   u32     parameter count, then per parameter in registration order:
//           string name; u8 recurrent; i64 adam step count;
//           u32 rank; i64 dims[rank];
//           f64 value[numel]; f64 adam_m[numel]; f64 adam_v[numel]
//   u32     batchnorm buffer count, then per buffer in model order:
//           string name; i64 update count; u32 features;
//           f64 run_mean[features]; f64 run_var[features]

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t rng_seed = 0;
  std::int64_t epoch = 0;
  double best_val_sdr = 0.0;
  std::string arch_text;
};

struct CheckpointData {
  CheckpointMeta meta;
  struct ParamEntry {
    std::string name;
    bool recurrent = false;
    std::int64_t step_count = 0;
    Shape shape;
    std::vector<double> value, adam_m, adam_v;
  };
  struct BufferEntry {
    std::string name;
    std::int64_t updates = 0;
    std::vector<double> run_mean, run_var;
  };
  std::vector<ParamEntry> params;
  std::vector<BufferEntry> buffers;
};

namespace detail {

template <class T>
void write_f64_array(std::ostream& os, const T* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    write_le<double>(os, static_cast<double>(p[i]));
}

inline std::vector<double> read_f64_array(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = read_le<double>(is);
  return v;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ParameterStore<T>& params,
                     const std::vector<std::pair<std::string, BnState<T>*>>& buffers) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), cat("cannot write checkpoint '", path, "'"));
  write_bytes(f, "RCKP", 4);
  write_le<std::uint32_t>(f, kCheckpointVersion);
  write_le<std::uint64_t>(f, meta.rng_seed);
  write_le<std::int64_t>(f, meta.epoch);
  write_le<double>(f, meta.best_val_sdr);
  write_string(f, meta.arch_text);

  write_le<std::uint32_t>(f, static_cast<std::uint32_t>(params.items().size()));
  for (const auto& p : params.items()) {
    write_string(f, p->name);
    write_le<std::uint8_t>(f, p->recurrent ? 1 : 0);
    write_le<std::int64_t>(f, p->step_count);
    const Shape& shape = p->value.shape();
    write_le<std::uint32_t>(f, static_cast<std::uint32_t>(shape.size()));
    for (std::int64_t d : shape) write_le<std::int64_t>(f, d);
    const auto n = static_cast<std::size_t>(p->value.numel());
    detail::write_f64_array(f, p->value.data(), n);
    detail::write_f64_array(f, p->adam_m.data(), n);
    detail::write_f64_array(f, p->adam_v.data(), n);
  }

  write_le<std::uint32_t>(f, static_cast<std::uint32_t>(buffers.size()));
  for (const auto& [name, state] : buffers) {
    write_string(f, name);
    write_le<std::int64_t>(f, state->updates);
    write_le<std::uint32_t>(f, static_cast<std::uint32_t>(state->run_mean.size()));
    detail::write_f64_array(f, state->run_mean.data(), state->run_mean.size());
    detail::write_f64_array(f, state->run_var.data(), state->run_var.size());
  }
  check(f.good(), cat("write failed for checkpoint '", path, "'"));
}

inline CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), cat("cannot open checkpoint '", path, "'"));
  char magic[4];
  read_bytes(f, magic, 4);
  check(std::string(magic, 4) == "RCKP",
        cat("'", path, "' is not a checkpoint file"));
  const auto version = read_le<std::uint32_t>(f);
  check(version == kCheckpointVersion,
        cat("checkpoint version ", version, " unsupported (expected ",
            kCheckpointVersion, ")"));
  CheckpointData ck;
  ck.meta.rng_seed = read_le<std::uint64_t>(f);
  ck.meta.epoch = read_le<std::int64_t>(f);
  ck.meta.best_val_sdr = read_le<double>(f);
  ck.meta.arch_text = read_string(f);

  const auto n_params = read_le<std::uint32_t>(f);
  ck.params.resize(n_params);
  for (auto& e : ck.params) {
    e.name = read_string(f);
    e.recurrent = read_le<std::uint8_t>(f) != 0;
    e.step_count = read_le<std::int64_t>(f);
    const auto rank = read_le<std::uint32_t>(f);
    e.shape.resize(rank);
    std::size_t numel = 1;
    for (auto& d : e.shape) {
      d = read_le<std::int64_t>(f);
      check(d > 0, cat("checkpoint: bad dimension in '", e.name, "'"));
      numel *= static_cast<std::size_t>(d);
    }
    e.value = detail::read_f64_array(f, numel);
    e.adam_m = detail::read_f64_array(f, numel);
    e.adam_v = detail::read_f64_array(f, numel);
  }

  const auto n_bufs = read_le<std::uint32_t>(f);
  ck.buffers.resize(n_bufs);
  for (auto& b : ck.buffers) {
    b.name = read_string(f);
    b.updates = read_le<std::int64_t>(f);
    const auto len = read_le<std::uint32_t>(f);
    b.run_mean = detail::read_f64_array(f, len);
    b.run_var = detail::read_f64_array(f, len);
  }
  return ck;
}

// Copies checkpoint contents into a freshly built model. Parameter and buffer
// lists must match the registration order, names, and shapes exactly — the
// arch text in the checkpoint is what guarantees a matching build.
template <class T>
void restore_checkpoint(const CheckpointData& ck, ParameterStore<T>& params,
                        const std::vector<std::pair<std::string, BnState<T>*>>& buffers) {
  check(ck.params.size() == params.items().size(),
        cat("checkpoint has ", ck.params.size(), " parameters, model has ",
            params.items().size()));
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    const auto& e = ck.params[i];
    auto& p = *params.items()[i];
    check(e.name == p.name, cat("checkpoint parameter '", e.name,
                                "' does not match model parameter '", p.name, "'"));
    check(e.shape == p.value.shape(),
          cat("checkpoint shape mismatch for '", e.name, "'"));
    p.step_count = e.step_count;
    p.recurrent = e.recurrent;
    const auto n = static_cast<std::size_t>(p.value.numel());
    for (std::size_t j = 0; j < n; ++j) {
      p.value.data()[j] = static_cast<T>(e.value[j]);
      p.adam_m[j] = static_cast<T>(e.adam_m[j]);
      p.adam_v[j] = static_cast<T>(e.adam_v[j]);
    }
  }
  check(ck.buffers.size() == buffers.size(),
        cat("checkpoint has ", ck.buffers.size(), " buffers, model has ",
            buffers.size()));
  for (std::size_t i = 0; i < ck.buffers.size(); ++i) {
    const auto& b = ck.buffers[i];
    auto& [name, state] = buffers[i];
    check(b.name == name, cat("checkpoint buffer '", b.name,
                              "' does not match model buffer '", name, "'"));
    check(b.run_mean.size() == state->run_mean.size(),
          cat("checkpoint buffer size mismatch for '", b.name, "'"));
    state->updates = b.updates;
    for (std::size_t j = 0; j < b.run_mean.size(); ++j) {
      state->run_mean[j] = static_cast<T>(b.run_mean[j]);
      state->run_var[j] = static_cast<T>(b.run_var[j]);
    }
  }
}

}  // namespace rcunet
