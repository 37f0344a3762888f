// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Turns an ArchSpec into a runnable U-net: registers parameters in a fixed,
// documented order, initializes them from a seeded RNG, and implements the
// forward pass with skip concatenations and frame padding for pooled archs.
#pragma once

#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rcunet/arch.hpp"
#include "rcunet/nn.hpp"
#include "rcunet/optim.hpp"
#include "rcunet/rnn.hpp"
#include "rcunet/tensor_ops.hpp"

namespace rcunet {

namespace detail {

// One batchnorm site: learnable scale/shift plus running statistics that are
// checkpointed as a named buffer.
template <typename T>
struct BnSite {
  std::string name;
  Tensor<T> gamma, beta;
  BnState<T> state;
};

template <typename T>
BnSite<T> make_bn(ParameterStore<T>& params, const std::string& name, std::int64_t features) {
  BnSite<T> site;
  site.name = name;
  site.gamma = Tensor<T>::full({features}, T(1));
  site.beta = Tensor<T>::zeros({features});
  params.add(name + ".gamma", site.gamma);
  params.add(name + ".beta", site.beta);
  site.state.init(features);
  return site;
}

// GRU weights for one sweep direction: uniform fan-in input projection,
// orthogonal recurrent blocks, zero bias. All four are clip targets.
template <typename T>
GruWeights<T> make_gru(ParameterStore<T>& params, const std::string& name, std::int64_t in_ch,
                       std::int64_t hidden, Rng& rng) {
  GruWeights<T> w;
  w.w_ih = add_param<T>(params, name + ".w_ih", {in_ch, 3 * hidden}, in_ch, rng, true);
  w.w_hzr = Tensor<T>::zeros({hidden, 2 * hidden});
  fill_orthogonal_blocks(w.w_hzr, rng);
  params.add(name + ".w_hzr", w.w_hzr, true);
  w.w_hc = Tensor<T>::zeros({hidden, hidden});
  fill_orthogonal_blocks(w.w_hc, rng);
  params.add(name + ".w_hc", w.w_hc, true);
  w.b = Tensor<T>::zeros({3 * hidden});
  params.add(name + ".b", w.b, true);
  return w;
}

}  // namespace detail

template <typename T>
class UNet {
 public:
  UNet(const ArchSpec& spec, ParameterStore<T>& params, Rng& rng) : spec_(spec) {
    const auto wires = wiring(spec);
    for (std::size_t bi = 0; bi < spec.blocks.size(); ++bi) {
      std::vector<Node> nodes;
      std::int64_t c = wires[bi].in_ch;
      for (std::size_t ai = 0; ai < spec.blocks[bi].atoms.size(); ++ai) {
        const std::string base =
            cat("block", bi + 1, ".", ai + 1);
        const LayerAtom& atom = spec.blocks[bi].atoms[ai];
        Node node;
        if (const auto* cv = std::get_if<ConvAtom>(&atom)) {
          node.kind = Kind::conv;
          node.w = detail::add_param<T>(params, base + ".conv.w", {3, 3, c, cv->features},
                                        9 * c, rng);
          node.b = detail::add_param<T>(params, base + ".conv.b", {cv->features}, 9 * c, rng);
          node.bn = detail::make_bn(params, base + ".bn", cv->features);
          c = cv->features;
        } else if (const auto* rc = std::get_if<RcAtom>(&atom)) {
          node.kind = Kind::rc;
          node.axis = rc->axis;
          const std::int64_t H = rc->units / 2;
          node.fw = detail::make_gru(params, base + ".gru_f", c, H, rng);
          node.bw = detail::make_gru(params, base + ".gru_b", c, H, rng);
          node.bn_r = detail::make_bn(params, base + ".bn_r", rc->units);
          const std::int64_t conv_in = c + rc->units;
          node.w = detail::add_param<T>(params, base + ".conv.w",
                                        {3, 3, conv_in, rc->features}, 9 * conv_in, rng);
          node.b = detail::add_param<T>(params, base + ".conv.b", {rc->features},
                                        9 * conv_in, rng);
          node.bn = detail::make_bn(params, base + ".bn", rc->features);
          c = rc->features;
        } else if (std::holds_alternative<PoolAtom>(atom)) {
          node.kind = Kind::pool;
        } else if (const auto* tc = std::get_if<TconvAtom>(&atom)) {
          node.kind = Kind::tconv;
          node.w = detail::add_param<T>(params, base + ".tconv.w", {6, 6, c, tc->features},
                                        9 * c, rng);
          node.b = detail::add_param<T>(params, base + ".tconv.b", {tc->features}, 9 * c, rng);
          c = tc->features;
        }
        nodes.push_back(std::move(node));
      }
      blocks_.push_back(std::move(nodes));
    }
    const std::int64_t out_ch = spec.out_channels();
    const std::int64_t c_last = wires.back().out_ch;
    head_w_ = detail::add_param<T>(params, "head.w", {1, 1, c_last, out_ch}, c_last, rng);
    head_b_ = detail::add_param<T>(params, "head.b", {out_ch}, c_last, rng);
  }

  // y: [bands, frames, 1] log-mel input. Returns [bands, frames, out_channels]
  // with frames restored to the input count after any pooling pad.
  Tensor<T> forward(const Tensor<T>& y, bool train) {
    check(y.rank() == 3 && y.dim(2) == 1, "unet: input must be [bands, frames, 1]");
    const std::int64_t N0 = y.dim(1);
    Tensor<T> x = y;
    std::int64_t left = 0;
    if (spec_.has_pooling()) {
      check(y.dim(0) % 16 == 0, "unet: pooled archs need the band count divisible by 16");
      const std::int64_t target = (N0 + 15) / 16 * 16;
      const std::int64_t pad = target - N0;
      if (pad > 0) {
        left = pad / 2;
        x = pad_frames_reflect(x, left, pad - left);
      }
    }
    const BnMode mode = train ? BnMode::train : BnMode::eval;
    const std::int64_t L = spec_.num_blocks();
    std::vector<Tensor<T>> outs;
    outs.push_back(x);
    for (std::int64_t l = 1; l <= L; ++l) {
      Tensor<T> cur = outs[l - 1];
      const std::int64_t sk = skip_source(l, L);
      if (sk > 0) cur = concat_feat(cur, outs[sk]);
      for (auto& node : blocks_[l - 1]) cur = run(node, cur, mode);
      outs.push_back(cur);
    }
    Tensor<T> out = conv2d(outs.back(), head_w_, head_b_);
    if (out.dim(1) != N0) out = slice_axis1(out, left, N0);
    return out;
  }

  const ArchSpec& spec() const { return spec_; }

  // Batchnorm running statistics, in registration order, for checkpointing.
  std::vector<std::pair<std::string, BnState<T>*>> buffers() {
    std::vector<std::pair<std::string, BnState<T>*>> out;
    for (auto& block : blocks_)
      for (auto& node : block) {
        if (node.kind == Kind::rc) out.emplace_back(node.bn_r.name, &node.bn_r.state);
        if (node.kind == Kind::conv || node.kind == Kind::rc)
          out.emplace_back(node.bn.name, &node.bn.state);
      }
    return out;
  }

 private:
  enum class Kind { conv, rc, pool, tconv };

  struct Node {
    Kind kind = Kind::conv;
    Axis axis = Axis::freq;
    Tensor<T> w, b;            // conv / tconv / RC-pair conv
    GruWeights<T> fw, bw;      // RC pair only
    detail::BnSite<T> bn;      // conv and RC-pair conv
    detail::BnSite<T> bn_r;    // RC pair recurrence output
  };

  Tensor<T> run(Node& node, const Tensor<T>& x, BnMode mode) {
    switch (node.kind) {
      case Kind::conv:
        return elu(batchnorm(conv2d(x, node.w, node.b), node.bn.gamma, node.bn.beta,
                             node.bn.state, mode));
      case Kind::rc: {
        Tensor<T> r = bwr(x, node.axis, node.fw, node.bw);
        r = batchnorm(r, node.bn_r.gamma, node.bn_r.beta, node.bn_r.state, mode);
        Tensor<T> c = concat_feat(x, r);
        return elu(batchnorm(conv2d(c, node.w, node.b), node.bn.gamma, node.bn.beta,
                             node.bn.state, mode));
      }
      case Kind::pool:
        return maxpool2x2(x);
      case Kind::tconv:
        return conv_transpose2d(x, node.w, node.b);
    }
    fail("unet: unreachable node kind");
    return x;
  }

  ArchSpec spec_;
  std::vector<std::vector<Node>> blocks_;
  Tensor<T> head_w_, head_b_;
};

}  // namespace rcunet
