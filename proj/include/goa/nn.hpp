// Copyright (c) 2026 The goa Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense kernels with hand-written backward passes. Every backward routine
// accumulates into caller-owned gradient buffers so that parameters shared
// across generation steps collect their total gradient in place.

#include <algorithm>
#include <cmath>
#include <span>

#include "goa/tensor.hpp"

namespace goa::nn {

template <class T>
struct Affine {
  Tensor<T> W;  // out x in
  Tensor<T> b;  // out x 1

  Affine() = default;
  Affine(std::size_t out, std::size_t in) : W(out, in), b(out, 1) {}

  std::size_t in() const noexcept { return W.cols(); }
  std::size_t out() const noexcept { return W.rows(); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".W", W);
    f(prefix + ".b", b);
  }
};

/// GRU cell weights. Gate convention: the update gate z keeps h_prev.
template <class T>
struct GruParams {
  Tensor<T> Wz, Uz, bz;
  Tensor<T> Wr, Ur, br;
  Tensor<T> Wn, Un, bn;

  GruParams() = default;
  GruParams(std::size_t input, std::size_t hidden)
      : Wz(hidden, input), Uz(hidden, hidden), bz(hidden, 1),
        Wr(hidden, input), Ur(hidden, hidden), br(hidden, 1),
        Wn(hidden, input), Un(hidden, hidden), bn(hidden, 1) {}

  std::size_t input() const noexcept { return Wz.cols(); }
  std::size_t hidden() const noexcept { return Wz.rows(); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".Wz", Wz); f(prefix + ".Uz", Uz); f(prefix + ".bz", bz);
    f(prefix + ".Wr", Wr); f(prefix + ".Ur", Ur); f(prefix + ".br", br);
    f(prefix + ".Wn", Wn); f(prefix + ".Un", Un); f(prefix + ".bn", bn);
  }
};

namespace detail {

// y += W x
template <class T>
inline void matvec_add(const Tensor<T>& W, std::span<const T> x, std::span<T> y) {
  const std::size_t cols = W.cols();
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const T* w = W.row(r).data();
    T s{0};
    for (std::size_t c = 0; c < cols; ++c) s += w[c] * x[c];
    y[r] += s;
  }
}

// gx += W^T gy
template <class T>
inline void matvec_t_add(const Tensor<T>& W, std::span<const T> gy, std::span<T> gx) {
  const std::size_t cols = W.cols();
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const T g = gy[r];
    if (g == T{0}) continue;
    const T* w = W.row(r).data();
    for (std::size_t c = 0; c < cols; ++c) gx[c] += w[c] * g;
  }
}

// gW += gy x^T
template <class T>
inline void outer_add(std::span<const T> gy, std::span<const T> x, Tensor<T>& gW) {
  const std::size_t cols = gW.cols();
  for (std::size_t r = 0; r < gW.rows(); ++r) {
    const T g = gy[r];
    if (g == T{0}) continue;
    T* w = gW.row(r).data();
    for (std::size_t c = 0; c < cols; ++c) w[c] += g * x[c];
  }
}

template <class T>
inline bool all_zero(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return x == T{0}; });
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointwise nonlinearities

template <class T>
inline T sigmoid(T s) {
  if (s >= T{0}) return T{1} / (T{1} + std::exp(-s));
  const T e = std::exp(s);
  return e / (T{1} + e);
}

/// d/ds given the forward output.
template <class T>
inline T sigmoid_backward(T out, T grad) {
  return grad * out * (T{1} - out);
}

template <class T>
inline Vec<T> relu(std::span<const T> x) {
  Vec<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

/// Subgradient 0 at the kink.
template <class T>
inline Vec<T> relu_backward(std::span<const T> pre, std::span<const T> grad) {
  Vec<T> g(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) g[i] = pre[i] > T{0} ? grad[i] : T{0};
  return g;
}

/// Max-subtracted softmax.
template <class T>
inline Vec<T> softmax(std::span<const T> logits) {
  Vec<T> p(logits.size());
  if (logits.empty()) return p;
  const T m = *std::max_element(logits.begin(), logits.end());
  T sum{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <class T>
inline Vec<T> softmax_backward(std::span<const T> p, std::span<const T> grad) {
  T inner{0};
  for (std::size_t i = 0; i < p.size(); ++i) inner += p[i] * grad[i];
  Vec<T> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (grad[i] - inner);
  return g;
}

// ---------------------------------------------------------------------------
// Affine

template <class T>
inline Vec<T> affine(const Tensor<T>& W, const Tensor<T>& b, std::span<const T> x) {
  detail::require(W.cols() == x.size() && b.rows() == W.rows() && b.cols() == 1,
                  "affine: shape mismatch W" + W.shape_string() + " b" + b.shape_string() +
                      " x" + shape_string(x.size()));
  Vec<T> y(b.values().begin(), b.values().end());
  detail::matvec_add<T>(W, x, y);
  return y;
}

template <class T>
inline Vec<T> affine(const Affine<T>& layer, std::span<const T> x) {
  return affine(layer.W, layer.b, x);
}

template <class T>
struct AffineGrads {
  Tensor<T> W;
  Tensor<T> b;
  Vec<T> x;
};

/// Accumulating form: gW += gy x^T, gb += gy, gx += W^T gy. `gx` may be empty
/// when the input gradient is not needed.
template <class T>
inline void affine_backward(const Tensor<T>& W, std::span<const T> x, std::span<const T> gy,
                            Tensor<T>& gW, Tensor<T>& gb, std::span<T> gx) {
  detail::outer_add<T>(gy, x, gW);
  for (std::size_t r = 0; r < gy.size(); ++r) gb[r] += gy[r];
  if (!gx.empty()) detail::matvec_t_add<T>(W, gy, gx);
}

template <class T>
inline void affine_backward(const Affine<T>& layer, std::span<const T> x, std::span<const T> gy,
                            Affine<T>& grads, std::span<T> gx) {
  affine_backward(layer.W, x, gy, grads.W, grads.b, gx);
}

/// Fresh-gradient form.
template <class T>
inline AffineGrads<T> affine_backward(const Tensor<T>& W, std::span<const T> x,
                                      std::span<const T> gy) {
  AffineGrads<T> g{Tensor<T>(W.rows(), W.cols()), Tensor<T>(W.rows(), 1), Vec<T>(W.cols())};
  affine_backward<T>(W, x, gy, g.W, g.b, g.x);
  return g;
}

// ---------------------------------------------------------------------------
// GRU cell
//
//   z = sigma(Wz x + Uz h + bz)
//   r = sigma(Wr x + Ur h + br)
//   n = tanh(Wn x + r * (Un h) + bn)
//   h' = (1 - z) * n + z * h

template <class T>
struct GruCache {
  Vec<T> x, h, z, r, u, n;
};

template <class T>
inline Vec<T> gru_cell(const GruParams<T>& p, std::span<const T> x, std::span<const T> h,
                       GruCache<T>* cache = nullptr) {
  const std::size_t H = p.hidden();
  detail::require(x.size() == p.input() && h.size() == H,
                  "gru_cell: expected x" + shape_string(p.input()) + " h" + shape_string(H) +
                      ", got x" + shape_string(x.size()) + " h" + shape_string(h.size()));
  const bool zero_state = detail::all_zero(h);

  Vec<T> az(p.bz.values().begin(), p.bz.values().end());
  Vec<T> ar(p.br.values().begin(), p.br.values().end());
  Vec<T> an(p.bn.values().begin(), p.bn.values().end());
  Vec<T> u(H, T{0});
  detail::matvec_add<T>(p.Wz, x, az);
  detail::matvec_add<T>(p.Wr, x, ar);
  detail::matvec_add<T>(p.Wn, x, an);
  if (!zero_state) {
    detail::matvec_add<T>(p.Uz, h, az);
    detail::matvec_add<T>(p.Ur, h, ar);
    detail::matvec_add<T>(p.Un, h, u);
  }

  Vec<T> out(H);
  for (std::size_t i = 0; i < H; ++i) {
    az[i] = sigmoid(az[i]);
    ar[i] = sigmoid(ar[i]);
    an[i] = std::tanh(an[i] + ar[i] * u[i]);
    out[i] = (T{1} - az[i]) * an[i] + az[i] * h[i];
  }
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h.assign(h.begin(), h.end());
    cache->z = std::move(az);
    cache->r = std::move(ar);
    cache->u = std::move(u);
    cache->n = std::move(an);
  }
  return out;
}

/// Backward through one cell. `gx` and `gh_prev` are accumulated into and may
/// be empty spans when not needed.
template <class T>
inline void gru_cell_backward(const GruParams<T>& p, const GruCache<T>& c,
                              std::span<const T> gh_next, GruParams<T>& grads, std::span<T> gx,
                              std::span<T> gh_prev) {
  const std::size_t H = p.hidden();
  const bool zero_state = detail::all_zero<T>(c.h);
  Vec<T> da_z(H), da_r(H), da_n(H), du(H);
  for (std::size_t i = 0; i < H; ++i) {
    const T g = gh_next[i];
    const T dn = g * (T{1} - c.z[i]);
    const T dz = g * (c.h[i] - c.n[i]);
    if (!gh_prev.empty()) gh_prev[i] += g * c.z[i];
    da_n[i] = dn * (T{1} - c.n[i] * c.n[i]);
    const T dr = da_n[i] * c.u[i];
    du[i] = da_n[i] * c.r[i];
    da_r[i] = dr * c.r[i] * (T{1} - c.r[i]);
    da_z[i] = dz * c.z[i] * (T{1} - c.z[i]);
  }
  detail::outer_add<T>(da_z, c.x, grads.Wz);
  detail::outer_add<T>(da_r, c.x, grads.Wr);
  detail::outer_add<T>(da_n, c.x, grads.Wn);
  for (std::size_t i = 0; i < H; ++i) {
    grads.bz[i] += da_z[i];
    grads.br[i] += da_r[i];
    grads.bn[i] += da_n[i];
  }
  if (!gx.empty()) {
    detail::matvec_t_add<T>(p.Wz, da_z, gx);
    detail::matvec_t_add<T>(p.Wr, da_r, gx);
    detail::matvec_t_add<T>(p.Wn, da_n, gx);
  }
  if (!zero_state) {
    detail::outer_add<T>(da_z, c.h, grads.Uz);
    detail::outer_add<T>(da_r, c.h, grads.Ur);
    detail::outer_add<T>(du, c.h, grads.Un);
  }
  if (!gh_prev.empty()) {
    detail::matvec_t_add<T>(p.Uz, da_z, gh_prev);
    detail::matvec_t_add<T>(p.Ur, da_r, gh_prev);
    detail::matvec_t_add<T>(p.Un, du, gh_prev);
  }
}

}  // namespace goa::nn
