// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/QR>
#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rcunet/tensor.hpp"

namespace rcunet {

// One trainable tensor with its Adam state. "recurrent" marks parameters of
// recurrence layers, the default targets of gradient clipping.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> adam_m, adam_v;
  std::int64_t step_count = 0;
  bool recurrent = false;
};

// Ordered, name-addressable collection of parameters. Registration order is
// fixed by model construction and drives both seeded init and checkpoints.
template <class T>
class ParameterStore {
 public:
  std::shared_ptr<Parameter<T>> add(const std::string& name, Tensor<T> value,
                                    bool recurrent = false) {
    check(index_.find(name) == index_.end(),
          cat("parameter '", name, "' registered twice"));
    auto p = std::make_shared<Parameter<T>>();
    p->name = name;
    p->value = value;
    p->value.set_requires_grad(true);
    p->adam_m.assign(static_cast<std::size_t>(value.numel()), T(0));
    p->adam_v.assign(static_cast<std::size_t>(value.numel()), T(0));
    p->recurrent = recurrent;
    index_[name] = items_.size();
    items_.push_back(p);
    return p;
  }

  std::shared_ptr<Parameter<T>> get(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), cat("unknown parameter '", name, "'"));
    return items_[it->second];
  }

  bool contains(const std::string& name) const {
    return index_.find(name) != index_.end();
  }

  const std::vector<std::shared_ptr<Parameter<T>>>& items() const {
    return items_;
  }

  std::int64_t total_count() const {
    std::int64_t n = 0;
    for (const auto& p : items_) n += p->value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : items_) p->value.zero_grad();
  }

 private:
  std::vector<std::shared_ptr<Parameter<T>>> items_;
  std::map<std::string, std::size_t> index_;
};

// Clamps gradients elementwise to [-threshold, threshold]. By default only
// recurrence parameters are clipped; all=true extends it to every parameter.
template <class T>
void clip_gradients(ParameterStore<T>& params, T threshold, bool all = false) {
  check(threshold > T(0), "clip_gradients: threshold must be positive");
  for (auto& p : params.items()) {
    if (!all && !p->recurrent) continue;
    if (!p->value.has_grad()) continue;
    for (auto& g : p->value.grad()) g = std::clamp(g, -threshold, threshold);
  }
}

// One Adam update with bias correction. A parameter whose gradient buffer
// was never touched counts as having a zero gradient: its moments decay and
// the value stays put when they are zero.
template <class T>
void adam_step(ParameterStore<T>& params, T lr, T beta1 = T(0.9),
               T beta2 = T(0.999), T eps = T(1e-8)) {
  for (auto& p : params.items()) {
    p->step_count++;
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(p->step_count));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(p->step_count));
    auto& val = p->value.value();
    const bool has_g = p->value.has_grad();
    const std::vector<T>* g = has_g ? &p->value.grad() : nullptr;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const T gi = g ? (*g)[i] : T(0);
      p->adam_m[i] = beta1 * p->adam_m[i] + (T(1) - beta1) * gi;
      p->adam_v[i] = beta2 * p->adam_v[i] + (T(1) - beta2) * gi * gi;
      const T mhat = p->adam_m[i] / bc1;
      const T vhat = p->adam_v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Seeded initializers.
// ---------------------------------------------------------------------------

// Uniform in (-sqrt(1/fan_in), sqrt(1/fan_in)).
template <class T>
void fill_uniform_fan_in(Tensor<T>& t, std::int64_t fan_in, Rng& rng) {
  check(fan_in > 0, "fill_uniform_fan_in: fan_in must be positive");
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (auto& v : t.value()) v = static_cast<T>(rng.uniform(-bound, bound));
}

namespace detail {

// Registers a freshly drawn fan-in-uniform tensor and returns a handle to it.
template <class T>
Tensor<T> add_param(ParameterStore<T>& params, const std::string& name, Shape shape,
                    std::int64_t fan_in, Rng& rng, bool recurrent = false) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  fill_uniform_fan_in(t, fan_in, rng);
  params.add(name, t, recurrent);
  return t;
}

}  // namespace detail

// Fills an [H, k*H] matrix with k independent orthogonal H x H column
// blocks: a Gaussian draw followed by a sign-fixed QR decomposition.
template <class T>
void fill_orthogonal_blocks(Tensor<T>& t, Rng& rng) {
  check(t.rank() == 2, "fill_orthogonal_blocks: matrix expected");
  const std::int64_t H = t.dim(0);
  check(t.dim(1) % H == 0,
        "fill_orthogonal_blocks: columns must be a multiple of rows");
  const std::int64_t blocks = t.dim(1) / H;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  for (std::int64_t blk = 0; blk < blocks; ++blk) {
    Mat A(H, H);
    for (std::int64_t i = 0; i < H; ++i)
      for (std::int64_t j = 0; j < H; ++j) A(i, j) = rng.gaussian();
    Eigen::HouseholderQR<Mat> qr(A);
    Mat Q = qr.householderQ() * Mat::Identity(H, H);
    Mat R = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (std::int64_t j = 0; j < H; ++j)
      if (R(j, j) < 0) Q.col(j) = -Q.col(j);
    for (std::int64_t i = 0; i < H; ++i)
      for (std::int64_t j = 0; j < H; ++j)
        t.value()[static_cast<std::size_t>(i * t.dim(1) + blk * H + j)] =
            static_cast<T>(Q(i, j));
  }
}

}  // namespace rcunet
