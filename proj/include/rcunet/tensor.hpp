// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rcunet/common.hpp"

namespace rcunet {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    check(d >= 0, "negative dimension in shape");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> value;
  // Gradient buffer; stays empty until the first adjoint touches this
  // tensor, which doubles as "no contribution yet".
  std::vector<T> grad;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

// Value plus optional gradient, shared by copies. Ops live in
// tensor_ops.hpp / nn.hpp / rnn.hpp and record their adjoint steps on the
// innermost active Tape.
template <class T>
class Tensor {
 public:
  using Impl = TensorImpl<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->value.assign(static_cast<std::size_t>(shape_numel(t.impl_->shape)), T(0));
    return t;
  }

  static Tensor full(Shape shape, T v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.impl_->value.begin(), t.impl_->value.end(), v);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> data) {
    check(shape_numel(shape) == static_cast<std::int64_t>(data.size()),
          "tensor data size does not match shape " + shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->value = std::move(data);
    return t;
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->value.size()); }

  std::vector<T>& value() { return impl_->value; }
  const std::vector<T>& value() const { return impl_->value; }
  T* data() { return impl_->value.data(); }
  const T* data() const { return impl_->value.data(); }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    impl_->requires_grad = b;
    return *this;
  }

  // Gradient access; allocates a zero buffer on first use.
  std::vector<T>& grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  void zero_grad() {
    if (impl_ && !impl_->grad.empty())
      std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
  }

  T item() const {
    check(numel() == 1, "item() requires a single-element tensor");
    return impl_->value[0];
  }

  std::int64_t flat_index(std::initializer_list<std::int64_t> idx) const {
    check(static_cast<int>(idx.size()) == rank(), "index rank mismatch");
    std::int64_t flat = 0;
    int i = 0;
    for (auto v : idx) {
      flat = flat * impl_->shape[static_cast<std::size_t>(i)] + v;
      ++i;
    }
    return flat;
  }

  T at(std::initializer_list<std::int64_t> idx) const {
    return impl_->value[static_cast<std::size_t>(flat_index(idx))];
  }

  std::shared_ptr<Impl> impl() const { return impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

// Records the adjoint step of every differentiable op executed while it is
// the innermost live Tape. backward() replays those steps in exact reverse
// execution order, which is a valid topological order of the data flow.
// Gradients accumulate into leaf tensors and are never cleared here, so a
// caller can sum contributions across several tapes before an optimizer
// step.
template <class T>
class Tape {
 public:
  Tape() : prev_(current_) { current_ = this; }
  ~Tape() { current_ = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current() { return current_; }

  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  std::size_t size() const { return steps_.size(); }

  // Seeds d(loss)/d(loss) = seed and runs all adjoints. A tape is consumed
  // by one backward pass; saved intermediates are not valid for a second
  // traversal, so reuse is rejected instead of silently producing garbage.
  void backward(Tensor<T>& loss, T seed = T(1)) {
    check(!consumed_,
          "tape already consumed by backward(); rebuild the forward pass "
          "before differentiating again");
    check(loss.defined() && loss.numel() == 1,
          "backward() expects a scalar loss tensor");
    check(loss.requires_grad(),
          "loss does not depend on any tracked parameter on this tape");
    consumed_ = true;
    loss.grad()[0] += seed;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
  }

 private:
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
  Tape* prev_ = nullptr;
  static thread_local Tape* current_;
};

template <class T>
thread_local Tape<T>* Tape<T>::current_ = nullptr;

namespace detail {

// True when a tape is live and at least one input is tracked; ops use this
// to decide whether to record an adjoint step.
template <class T>
bool track(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::current() == nullptr) return false;
  for (const auto* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Adjoint steps start by fetching the output gradient; an empty buffer
// means the output never influenced the loss and the step is a no-op.
template <class T>
const std::vector<T>* out_grad(const std::shared_ptr<TensorImpl<T>>& o) {
  return o->grad.empty() ? nullptr : &o->grad;
}

}  // namespace detail

}  // namespace rcunet
