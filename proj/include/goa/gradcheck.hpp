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
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "goa/error.hpp"
#include "goa/rng.hpp"

namespace goa {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coordinates = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0;           // picks the sampled subset
  int order = 2;                    // 2: (f(+h) - f(-h)) / 2h; 4: five-point central stencil
};

/// Compares an analytic gradient against central differences.
///
/// `loss` maps a flat parameter vector to a scalar and, when `grad` is
/// non-empty, writes the analytic gradient into it. The relative error of a
/// coordinate is |a - fd| / max(|a|, |fd|, 1e-8).
inline GradCheckReport finite_diff_check(
    const std::function<double(std::span<const double>, std::span<double>)>& loss,
    std::vector<double> params, GradCheckOptions opt = {}) {
  if (!(opt.step > 0.0)) throw ConfigError("finite_diff_check: step must be positive");
  if (opt.order != 2 && opt.order != 4) throw ConfigError("finite_diff_check: order must be 2 or 4");
  const std::size_t n = params.size();
  std::vector<double> analytic(n, 0.0);
  const double base = loss(params, analytic);
  const double again = loss(params, {});
  if (base != again && !(std::isnan(base) && std::isnan(again)))
    throw CheckError("finite_diff_check: loss is not deterministic across evaluations");

  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (opt.max_coordinates != 0 && opt.max_coordinates < n) {
    CounterRng rng(opt.seed);
    for (std::size_t i = 0; i < opt.max_coordinates; ++i)
      std::swap(coords[i], coords[i + rng.uniform_index(n - i)]);
    coords.resize(opt.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (std::size_t idx : coords) {
    const double saved = params[idx];
    auto at = [&](double offset) {
      params[idx] = saved + offset;
      const double v = loss(params, {});
      params[idx] = saved;
      return v;
    };
    const double h = opt.step;
    const double fd = opt.order == 2
                          ? (at(h) - at(-h)) / (2.0 * h)
                          : (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
    const double err = std::abs(a - fd) / denom;
    ++report.checked;
    if (err > report.max_relative_error || std::isnan(err)) {
      report.max_relative_error = std::isnan(err) ? INFINITY : err;
      report.worst_index = idx;
      report.worst_analytic = a;
      report.worst_numeric = fd;
    }
  }
  return report;
}

}  // namespace goa
