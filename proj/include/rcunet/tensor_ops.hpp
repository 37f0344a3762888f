// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "rcunet/tensor.hpp"

namespace rcunet {

template <class T>
using MatrixRM =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<MatrixRM<T>>;
template <class T>
using MapCM = Eigen::Map<const MatrixRM<T>>;

namespace detail {

template <class T>
Tensor<T> like(const Tensor<T>& x) {
  return Tensor<T>::zeros(x.shape());
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check(detail::same_shape(a.shape(), b.shape()),
        cat("add: shape mismatch ", shape_str(a.shape()), " vs ",
            shape_str(b.shape())));
  Tensor<T> out = detail::like(a);
  const std::size_t n = a.value().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (detail::track<T>({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape<T>::current()->record([ai, bi, oi] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < og->size(); ++i) ai->grad[i] += (*og)[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < og->size(); ++i) bi->grad[i] += (*og)[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check(detail::same_shape(a.shape(), b.shape()),
        cat("sub: shape mismatch ", shape_str(a.shape()), " vs ",
            shape_str(b.shape())));
  Tensor<T> out = detail::like(a);
  const std::size_t n = a.value().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (detail::track<T>({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape<T>::current()->record([ai, bi, oi] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < og->size(); ++i) ai->grad[i] += (*og)[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < og->size(); ++i) bi->grad[i] -= (*og)[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check(detail::same_shape(a.shape(), b.shape()),
        cat("mul: shape mismatch ", shape_str(a.shape()), " vs ",
            shape_str(b.shape())));
  Tensor<T> out = detail::like(a);
  const std::size_t n = a.value().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (detail::track<T>({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape<T>::current()->record([ai, bi, oi] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < og->size(); ++i)
          ai->grad[i] += (*og)[i] * bi->value[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < og->size(); ++i)
          bi->grad[i] += (*og)[i] * ai->value[i];
      }
    });
  }
  return out;
}

// out = scale * x + shift, with scalar constants.
template <class T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
  Tensor<T> out = detail::like(x);
  const std::size_t n = x.value().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = scale * x.data()[i] + shift;
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi, scale] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < og->size(); ++i)
        xi->grad[i] += scale * (*og)[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = detail::like(x);
  const std::size_t n = x.value().size();
  for (std::size_t i = 0; i < n; ++i)
    out.data()[i] = T(1) / (T(1) + std::exp(-x.data()[i]));
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < og->size(); ++i) {
        T y = oi->value[i];
        xi->grad[i] += (*og)[i] * y * (T(1) - y);
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> out = detail::like(x);
  const std::size_t n = x.value().size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < og->size(); ++i) {
        T y = oi->value[i];
        xi->grad[i] += (*og)[i] * (T(1) - y * y);
      }
    });
  }
  return out;
}

// ELU with unit alpha: x for x > 0, exp(x) - 1 otherwise.
template <class T>
Tensor<T> elu(const Tensor<T>& x) {
  Tensor<T> out = detail::like(x);
  const std::size_t n = x.value().size();
  for (std::size_t i = 0; i < n; ++i) {
    T v = x.data()[i];
    out.data()[i] = v > T(0) ? v : std::exp(v) - T(1);
  }
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < og->size(); ++i) {
        T v = xi->value[i];
        xi->grad[i] += (*og)[i] * (v > T(0) ? T(1) : oi->value[i] + T(1));
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra.
// ---------------------------------------------------------------------------

// [m,k] x [k,n] -> [m,n].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
        cat("matmul: incompatible shapes ", shape_str(a.shape()), " x ",
            shape_str(b.shape())));
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out = Tensor<T>::zeros({m, n});
  MapCM<T> A(a.data(), m, k), B(b.data(), k, n);
  MapM<T> O(out.data(), m, n);
  O.noalias() = A * B;
  if (detail::track<T>({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape<T>::current()->record([ai, bi, oi, m, k, n] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      MapCM<T> dO(og->data(), m, n);
      MapCM<T> A(ai->value.data(), m, k), B(bi->value.data(), k, n);
      if (ai->requires_grad) {
        ai->ensure_grad();
        MapM<T> dA(ai->grad.data(), m, k);
        dA.noalias() += dO * B.transpose();
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        MapM<T> dB(bi->grad.data(), k, n);
        dB.noalias() += A.transpose() * dO;
      }
    });
  }
  return out;
}

// Adds a length-c row vector to every row of an [r,c] matrix.
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& m, const Tensor<T>& v) {
  check(m.rank() == 2 && v.rank() == 1 && m.dim(1) == v.dim(0),
        cat("add_rowvec: incompatible shapes ", shape_str(m.shape()), " + ",
            shape_str(v.shape())));
  const auto r = m.dim(0), c = m.dim(1);
  Tensor<T> out = detail::like(m);
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      out.data()[i * c + j] = m.data()[i * c + j] + v.data()[j];
  if (detail::track<T>({&m, &v})) {
    out.set_requires_grad(true);
    auto mi = m.impl(), vi = v.impl(), oi = out.impl();
    Tape<T>::current()->record([mi, vi, oi, r, c] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      if (mi->requires_grad) {
        mi->ensure_grad();
        for (std::size_t i = 0; i < og->size(); ++i) mi->grad[i] += (*og)[i];
      }
      if (vi->requires_grad) {
        vi->ensure_grad();
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t j = 0; j < c; ++j)
            vi->grad[static_cast<std::size_t>(j)] +=
                (*og)[static_cast<std::size_t>(i * c + j)];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape surgery. All layouts are row major with the feature axis last.
// ---------------------------------------------------------------------------

// Concatenates along the last axis; leading axes must match.
template <class T>
Tensor<T> concat_feat(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.rank() == b.rank() && a.rank() >= 1, "concat_feat: rank mismatch");
  for (int i = 0; i + 1 < a.rank(); ++i)
    check(a.dim(i) == b.dim(i),
          cat("concat_feat: leading shape mismatch ", shape_str(a.shape()),
              " vs ", shape_str(b.shape())));
  const std::int64_t ka = a.dim(a.rank() - 1), kb = b.dim(b.rank() - 1);
  const std::int64_t rows = a.numel() / std::max<std::int64_t>(ka, 1);
  Shape os = a.shape();
  os.back() = ka + kb;
  Tensor<T> out = Tensor<T>::zeros(os);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::copy_n(a.data() + r * ka, ka, out.data() + r * (ka + kb));
    std::copy_n(b.data() + r * kb, kb, out.data() + r * (ka + kb) + ka);
  }
  if (detail::track<T>({&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape<T>::current()->record([ai, bi, oi, rows, ka, kb] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t j = 0; j < ka; ++j)
            ai->grad[static_cast<std::size_t>(r * ka + j)] +=
                (*og)[static_cast<std::size_t>(r * (ka + kb) + j)];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t j = 0; j < kb; ++j)
            bi->grad[static_cast<std::size_t>(r * kb + j)] +=
                (*og)[static_cast<std::size_t>(r * (ka + kb) + ka + j)];
      }
    });
  }
  return out;
}

// Slice [from, from+count) of the last axis.
template <class T>
Tensor<T> slice_feat(const Tensor<T>& x, std::int64_t from, std::int64_t count) {
  const std::int64_t k = x.dim(x.rank() - 1);
  check(from >= 0 && count >= 0 && from + count <= k, "slice_feat: bad range");
  const std::int64_t rows = x.numel() / std::max<std::int64_t>(k, 1);
  Shape os = x.shape();
  os.back() = count;
  Tensor<T> out = Tensor<T>::zeros(os);
  for (std::int64_t r = 0; r < rows; ++r)
    std::copy_n(x.data() + r * k + from, count, out.data() + r * count);
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi, rows, k, from, count] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < count; ++j)
          xi->grad[static_cast<std::size_t>(r * k + from + j)] +=
              (*og)[static_cast<std::size_t>(r * count + j)];
    });
  }
  return out;
}

// Slice [from, from+count) of axis 1 of a rank-3 tensor [A,B,K].
template <class T>
Tensor<T> slice_axis1(const Tensor<T>& x, std::int64_t from, std::int64_t count) {
  check(x.rank() == 3, "slice_axis1: rank-3 input required");
  const std::int64_t A = x.dim(0), B = x.dim(1), K = x.dim(2);
  check(from >= 0 && count >= 0 && from + count <= B, "slice_axis1: bad range");
  Tensor<T> out = Tensor<T>::zeros({A, count, K});
  for (std::int64_t a = 0; a < A; ++a)
    std::copy_n(x.data() + (a * B + from) * K, count * K,
                out.data() + a * count * K);
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi, A, B, K, from, count] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::int64_t a = 0; a < A; ++a)
        for (std::int64_t j = 0; j < count * K; ++j)
          xi->grad[static_cast<std::size_t>((a * B + from) * K + j)] +=
              (*og)[static_cast<std::size_t>(a * count * K + j)];
    });
  }
  return out;
}

// Extract row block t of axis 0: [A,B,K] -> [B,K].
template <class T>
Tensor<T> slice_axis0(const Tensor<T>& x, std::int64_t t) {
  check(x.rank() == 3 && t >= 0 && t < x.dim(0), "slice_axis0: bad index");
  const std::int64_t B = x.dim(1), K = x.dim(2);
  Tensor<T> out = Tensor<T>::zeros({B, K});
  std::copy_n(x.data() + t * B * K, B * K, out.data());
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi, t, B, K] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::int64_t j = 0; j < B * K; ++j)
        xi->grad[static_cast<std::size_t>(t * B * K + j)] +=
            (*og)[static_cast<std::size_t>(j)];
    });
  }
  return out;
}

// Swap the first two axes of a rank-3 tensor: [A,B,K] -> [B,A,K].
template <class T>
Tensor<T> permute01(const Tensor<T>& x) {
  check(x.rank() == 3, "permute01: rank-3 input required");
  const std::int64_t A = x.dim(0), B = x.dim(1), K = x.dim(2);
  Tensor<T> out = Tensor<T>::zeros({B, A, K});
  for (std::int64_t a = 0; a < A; ++a)
    for (std::int64_t b = 0; b < B; ++b)
      std::copy_n(x.data() + (a * B + b) * K, K, out.data() + (b * A + a) * K);
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi, A, B, K] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (std::int64_t a = 0; a < A; ++a)
        for (std::int64_t b = 0; b < B; ++b)
          for (std::int64_t j = 0; j < K; ++j)
            xi->grad[static_cast<std::size_t>((a * B + b) * K + j)] +=
                (*og)[static_cast<std::size_t>((b * A + a) * K + j)];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros({1});
  T acc = T(0);
  for (auto v : x.value()) acc += v;
  out.data()[0] = acc;
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      for (auto& g : xi->grad) g += (*og)[0];
    });
  }
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return affine(sum(x), T(1) / static_cast<T>(x.numel()), T(0));
}

// Picks one element as a scalar; used by the receptive-field probes.
template <class T>
Tensor<T> element(const Tensor<T>& x, std::int64_t flat) {
  check(flat >= 0 && flat < x.numel(), "element: index out of range");
  Tensor<T> out = Tensor<T>::zeros({1});
  out.data()[0] = x.data()[flat];
  if (detail::track<T>({&x})) {
    out.set_requires_grad(true);
    auto xi = x.impl();
    auto oi = out.impl();
    Tape<T>::current()->record([xi, oi, flat] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      xi->ensure_grad();
      xi->grad[static_cast<std::size_t>(flat)] += (*og)[0];
    });
  }
  return out;
}

// Mean absolute error over all elements. The derivative at exact ties is
// taken as zero.
template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check(detail::same_shape(pred.shape(), target.shape()),
        "l1_loss: shape mismatch");
  Tensor<T> out = Tensor<T>::zeros({1});
  T acc = T(0);
  const std::size_t n = pred.value().size();
  for (std::size_t i = 0; i < n; ++i)
    acc += std::abs(pred.data()[i] - target.data()[i]);
  out.data()[0] = acc / static_cast<T>(n);
  if (detail::track<T>({&pred, &target})) {
    out.set_requires_grad(true);
    auto pi = pred.impl(), ti = target.impl(), oi = out.impl();
    Tape<T>::current()->record([pi, ti, oi, n] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      const T w = (*og)[0] / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i) {
        T d = pi->value[i] - ti->value[i];
        T s = d > T(0) ? w : (d < T(0) ? -w : T(0));
        if (pi->requires_grad) {
          pi->ensure_grad();
          pi->grad[i] += s;
        }
        if (ti->requires_grad) {
          ti->ensure_grad();
          ti->grad[i] -= s;
        }
      }
    });
  }
  return out;
}

// Sum of |pred - target| over elements whose axis-1 index n has mask[n] != 0.
// pred and target are [B,N,K]; mask has length N. Padded frames contribute
// nothing to the value or the gradient.
template <class T>
Tensor<T> masked_l1_sum3(const Tensor<T>& pred, const Tensor<T>& target,
                         const std::vector<T>& mask) {
  check(pred.rank() == 3 && detail::same_shape(pred.shape(), target.shape()),
        "masked_l1_sum3: rank-3 tensors of equal shape required");
  check(static_cast<std::int64_t>(mask.size()) == pred.dim(1),
        "masked_l1_sum3: mask length must equal axis-1 extent");
  const std::int64_t B = pred.dim(0), N = pred.dim(1), K = pred.dim(2);
  Tensor<T> out = Tensor<T>::zeros({1});
  T acc = T(0);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t n = 0; n < N; ++n) {
      if (mask[static_cast<std::size_t>(n)] == T(0)) continue;
      const T* p = pred.data() + (b * N + n) * K;
      const T* t = target.data() + (b * N + n) * K;
      for (std::int64_t j = 0; j < K; ++j) acc += std::abs(p[j] - t[j]);
    }
  out.data()[0] = acc;
  if (detail::track<T>({&pred, &target})) {
    out.set_requires_grad(true);
    auto pi = pred.impl(), ti = target.impl(), oi = out.impl();
    auto m = std::make_shared<std::vector<T>>(mask);
    Tape<T>::current()->record([pi, ti, oi, m, B, N, K] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      const T w = (*og)[0];
      if (pi->requires_grad) pi->ensure_grad();
      if (ti->requires_grad) ti->ensure_grad();
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t n = 0; n < N; ++n) {
          if ((*m)[static_cast<std::size_t>(n)] == T(0)) continue;
          for (std::int64_t j = 0; j < K; ++j) {
            std::size_t i = static_cast<std::size_t>((b * N + n) * K + j);
            T d = pi->value[i] - ti->value[i];
            T s = d > T(0) ? w : (d < T(0) ? -w : T(0));
            if (pi->requires_grad) pi->grad[i] += s;
            if (ti->requires_grad) ti->grad[i] -= s;
          }
        }
    });
  }
  return out;
}

// Same as masked_l1_sum3 for [R,C] matrices with the mask over rows.
template <class T>
Tensor<T> masked_l1_sum2(const Tensor<T>& pred, const Tensor<T>& target,
                         const std::vector<T>& mask) {
  check(pred.rank() == 2 && detail::same_shape(pred.shape(), target.shape()),
        "masked_l1_sum2: rank-2 tensors of equal shape required");
  check(static_cast<std::int64_t>(mask.size()) == pred.dim(0),
        "masked_l1_sum2: mask length must equal row count");
  const std::int64_t R = pred.dim(0), C = pred.dim(1);
  Tensor<T> out = Tensor<T>::zeros({1});
  T acc = T(0);
  for (std::int64_t r = 0; r < R; ++r) {
    if (mask[static_cast<std::size_t>(r)] == T(0)) continue;
    for (std::int64_t j = 0; j < C; ++j)
      acc += std::abs(pred.data()[r * C + j] - target.data()[r * C + j]);
  }
  out.data()[0] = acc;
  if (detail::track<T>({&pred, &target})) {
    out.set_requires_grad(true);
    auto pi = pred.impl(), ti = target.impl(), oi = out.impl();
    auto m = std::make_shared<std::vector<T>>(mask);
    Tape<T>::current()->record([pi, ti, oi, m, R, C] {
      const auto* og = detail::out_grad(oi);
      if (!og) return;
      const T w = (*og)[0];
      if (pi->requires_grad) pi->ensure_grad();
      if (ti->requires_grad) ti->ensure_grad();
      for (std::int64_t r = 0; r < R; ++r) {
        if ((*m)[static_cast<std::size_t>(r)] == T(0)) continue;
        for (std::int64_t j = 0; j < C; ++j) {
          std::size_t i = static_cast<std::size_t>(r * C + j);
          T d = pi->value[i] - ti->value[i];
          T s = d > T(0) ? w : (d < T(0) ? -w : T(0));
          if (pi->requires_grad) pi->grad[i] += s;
          if (ti->requires_grad) ti->grad[i] -= s;
        }
      }
    });
  }
  return out;
}

}  // namespace rcunet
