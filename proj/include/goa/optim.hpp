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

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "goa/tensor.hpp"

namespace goa {

/// Flat view of a parameter bundle: every named tensor in visitation order.
/// A bundle is any type with `visit(F)` calling `f(name, Tensor<T>&)`.
template <class T>
using TensorRefs = std::vector<std::pair<std::string, Tensor<T>*>>;

template <class T, class Bundle>
TensorRefs<T> collect_tensors(Bundle& bundle) {
  TensorRefs<T> refs;
  bundle.visit([&](const std::string& name, Tensor<T>& t) { refs.emplace_back(name, &t); });
  return refs;
}

template <class T, class Bundle>
std::size_t parameter_count(Bundle& bundle) {
  std::size_t n = 0;
  bundle.visit([&](const std::string&, Tensor<T>& t) { n += t.size(); });
  return n;
}

struct AdamwHyper {
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double clip_norm = 1.0;  // <= 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct OptimizerState {
  AdamwHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

template <class T, class Bundle>
OptimizerState<T> make_optimizer_state(Bundle& params, AdamwHyper hyper = {}) {
  OptimizerState<T> s;
  s.hyper = hyper;
  for (auto& [name, t] : collect_tensors<T>(params)) {
    s.names.push_back(name);
    s.first_moment.emplace_back(t->rows(), t->cols());
    s.second_moment.emplace_back(t->rows(), t->cols());
  }
  return s;
}

struct AdamwReport {
  double grad_norm = 0.0;     // before clipping
  double clipped_norm = 0.0;  // after clipping
};

/// One AdamW update. Gradients are clipped by their joint L2 norm over every
/// tensor before the moment update; weight decay is decoupled from the
/// adaptive term.
template <class T, class Bundle>
AdamwReport adamw_step(OptimizerState<T>& state, Bundle& params, Bundle& grads) {
  auto p = collect_tensors<T>(params);
  auto g = collect_tensors<T>(grads);
  if (p.size() != g.size() || p.size() != state.first_moment.size())
    throw ConfigError("adamw_step: parameter/gradient/state tensor count mismatch");

  double sq = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto& gt = *g[k].second;
    if (gt.size() != p[k].second->size() || gt.size() != state.first_moment[k].size())
      throw ConfigError("adamw_step: shape mismatch for " + p[k].first);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!std::isfinite(gt[i]))
        throw TrainingError("adamw_step: non-finite gradient in " + p[k].first);
      sq += static_cast<double>(gt[i]) * static_cast<double>(gt[i]);
    }
  }

  const auto& h = state.hyper;
  AdamwReport report;
  report.grad_norm = std::sqrt(sq);
  const double scale =
      (h.clip_norm > 0.0 && report.grad_norm > h.clip_norm) ? h.clip_norm / report.grad_norm : 1.0;
  report.clipped_norm = report.grad_norm * scale;

  ++state.step;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto& pt = *p[k].second;
    const auto& gt = *g[k].second;
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < pt.size(); ++i) {
      const double gi = static_cast<double>(gt[i]) * scale;
      m[i] = static_cast<T>(h.beta1 * m[i] + (1.0 - h.beta1) * gi);
      v[i] = static_cast<T>(h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      pt[i] = static_cast<T>(pt[i] - h.lr * (mhat / (std::sqrt(vhat) + h.epsilon) +
                                             h.weight_decay * pt[i]));
    }
  }
  return report;
}

}  // namespace goa
