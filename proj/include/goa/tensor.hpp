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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "goa/error.hpp"

namespace goa {

template <class T>
using Vec = std::vector<T>;

/// Dense row-major matrix. Bias vectors are stored as rows x 1 tensors so that
/// every learnable parameter shares one type.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor column(std::span<const T> values) {
    Tensor t(values.size(), 1);
    std::copy(values.begin(), values.end(), t.data_.begin());
    return t;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  std::string shape_string() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <class T>
inline T dot(std::span<const T> a, std::span<const T> b) {
  T s{0};
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class T>
inline T squared_norm(std::span<const T> a) {
  return dot<T>(a, a);
}

/// out += alpha * x
template <class T>
inline void axpy(T alpha, std::span<const T> x, std::span<T> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
}

template <class T>
inline Vec<T> concat(std::initializer_list<std::span<const T>> parts) {
  Vec<T> out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline std::string shape_string(std::size_t n) { return "[" + std::to_string(n) + "]"; }

}  // namespace goa
