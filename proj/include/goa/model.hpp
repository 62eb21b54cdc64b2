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

// Autoregressive group-graph generator: history aggregation, gated task
// fusion, bottlenecked group and edge prediction, and the inference loop.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <span>

#include "goa/embedding.hpp"
#include "goa/graph.hpp"
#include "goa/nn.hpp"
#include "goa/params.hpp"

namespace goa {

enum class CibPath { Group, Edge };

inline constexpr Real kLogSigmaMin = -6.0;
inline constexpr Real kLogSigmaMax = 2.0;

/// Diagonal Gaussian; sigma = exp(log_sigma), log_sigma clamped to [-6, 2].
struct GaussianDiag {
  Vector mu;
  Vector log_sigma;

  std::size_t dim() const noexcept { return mu.size(); }
  Real sigma(std::size_t i) const { return std::exp(log_sigma[i]); }
};

struct GaussianHeadCache {
  Vector input;
  Vector pre_log_sigma;  // before clamping
};

inline GaussianDiag gaussian_head(const GaussianHeadParams& head, std::span<const Real> x,
                                  GaussianHeadCache* cache = nullptr) {
  GaussianDiag g{nn::affine(head.mu, x), nn::affine(head.log_sigma, x)};
  if (cache) *cache = {Vector(x.begin(), x.end()), g.log_sigma};
  for (auto& v : g.log_sigma) v = std::clamp(v, kLogSigmaMin, kLogSigmaMax);
  return g;
}

/// Gradient through the clamp is zero where the pre-activation was clipped.
inline void gaussian_head_backward(const GaussianHeadParams& head, const GaussianHeadCache& c,
                                   std::span<const Real> gmu, std::span<const Real> gls,
                                   GaussianHeadParams& grads, std::span<Real> gx) {
  Vector gpre(gls.size());
  for (std::size_t i = 0; i < gls.size(); ++i) {
    const Real v = c.pre_log_sigma[i];
    gpre[i] = (v >= kLogSigmaMin && v <= kLogSigmaMax) ? gls[i] : 0.0;
  }
  nn::affine_backward<Real>(head.mu, c.input, gmu, grads.mu, gx);
  nn::affine_backward<Real>(head.log_sigma, c.input, gpre, grads.log_sigma, gx);
}

inline const GaussianHeadParams& encoder_head(const ModelParams& p, CibPath path) {
  return path == CibPath::Group ? p.group_encoder : p.edge_encoder;
}

inline const GaussianHeadParams& prior_head(const ModelParams& p, CibPath path) {
  return path == CibPath::Group ? p.group_prior : p.edge_prior;
}

/// q(c | x) for the given path.
inline GaussianDiag cib_encode(const ModelParams& p, CibPath path, std::span<const Real> x) {
  return gaussian_head(encoder_head(p, path), x);
}

/// Task-conditioned prior p(c | z_q). Zero weights give N(0, I).
inline GaussianDiag conditional_prior(const ModelParams& p, CibPath path,
                                      std::span<const Real> z_q) {
  return gaussian_head(prior_head(p, path), z_q);
}

/// c = mu + sigma * epsilon
inline Vector reparameterize(const GaussianDiag& g, std::span<const Real> epsilon) {
  if (epsilon.size() != g.dim())
    throw ConfigError("reparameterize: epsilon has dim " + std::to_string(epsilon.size()) +
                      ", expected " + std::to_string(g.dim()));
  Vector c(g.dim());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = g.mu[i] + g.sigma(i) * epsilon[i];
  return c;
}

/// KL(q || p) between diagonal Gaussians.
inline Real kl_diag(const GaussianDiag& q, const GaussianDiag& p) {
  if (q.dim() != p.dim()) throw ConfigError("kl_diag: dimension mismatch");
  Real kl = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const Real var_q = std::exp(2.0 * q.log_sigma[i]);
    const Real var_p = std::exp(2.0 * p.log_sigma[i]);
    const Real diff = q.mu[i] - p.mu[i];
    kl += p.log_sigma[i] - q.log_sigma[i] + (var_q + diff * diff) / (2.0 * var_p) - 0.5;
  }
  return kl;
}

/// Accumulates scale * dKL/d(q.mu, q.log_sigma, p.mu, p.log_sigma).
inline void kl_diag_backward(const GaussianDiag& q, const GaussianDiag& p, Real scale,
                             std::span<Real> gq_mu, std::span<Real> gq_ls, std::span<Real> gp_mu,
                             std::span<Real> gp_ls) {
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const Real var_q = std::exp(2.0 * q.log_sigma[i]);
    const Real var_p = std::exp(2.0 * p.log_sigma[i]);
    const Real diff = q.mu[i] - p.mu[i];
    gq_mu[i] += scale * diff / var_p;
    gp_mu[i] -= scale * diff / var_p;
    gq_ls[i] += scale * (var_q / var_p - 1.0);
    gp_ls[i] += scale * (1.0 - (var_q + diff * diff) / var_p);
  }
}

// ---------------------------------------------------------------------------
// History and fusion

/// Folds the history GRU over the embeddings of the groups generated so far,
/// starting from the zero state.
inline Vector aggregate_history(const ModelParams& p, std::span<const Vector> selected) {
  Vector h(p.history.hidden(), 0.0);
  for (const auto& x : selected) h = nn::gru_cell<Real>(p.history, x, h);
  return h;
}

struct StepState {
  Vector h_his;
  Real gate = 0.5;
  Vector h_comb;
};

/// g = sigmoid(h_his . z_q / sqrt(d)); h_comb = (1 - g) h_his + g z_q + e_pos[t]
inline StepState fuse_task(const ModelParams& p, std::span<const Real> h_his,
                           std::span<const Real> z_q, std::size_t t) {
  if (t >= p.step_embedding.rows())
    throw StepOverflowError("fuse_task: step " + std::to_string(t) + " exceeds max_steps " +
                            std::to_string(p.step_embedding.rows()));
  const std::size_t d = h_his.size();
  if (z_q.size() != d || p.step_embedding.cols() != d)
    throw ConfigError("fuse_task: dimension mismatch");
  StepState s;
  s.h_his.assign(h_his.begin(), h_his.end());
  s.gate = nn::sigmoid(dot<Real>(h_his, z_q) / std::sqrt(static_cast<Real>(d)));
  s.h_comb.resize(d);
  const auto pos = p.step_embedding.row(t);
  for (std::size_t i = 0; i < d; ++i)
    s.h_comb[i] = (1.0 - s.gate) * h_his[i] + s.gate * z_q[i] + pos[i];
  return s;
}

// ---------------------------------------------------------------------------
// Prediction heads

/// Train mode reparameterizes with the supplied noise; Infer mode uses the
/// Gaussian mean.
struct CibMode {
  std::optional<std::span<const Real>> epsilon;

  static CibMode infer() { return {}; }
  static CibMode train(std::span<const Real> eps) { return {eps}; }
  bool is_train() const noexcept { return epsilon.has_value(); }
};

inline Vector sample_latent(const GaussianDiag& q, const CibMode& mode) {
  return mode.is_train() ? reparameterize(q, *mode.epsilon) : q.mu;
}

inline Vector candidate_logits(std::span<const Real> c, const CandidateMatrix& X) {
  Vector logits(X.x.rows());
  for (std::size_t k = 0; k < logits.size(); ++k) logits[k] = dot<Real>(c, X.row(k));
  return logits;
}

struct GroupPrediction {
  Vector probabilities;  // K + 1 entries, END last
  Real kl = 0.0;
};

inline Vector group_latent(const ModelParams& p, std::span<const Real> h_comb,
                           const CibMode& mode, GaussianDiag* q_out = nullptr) {
  const Vector zero(p.group_gru.hidden(), 0.0);
  const Vector x_group = nn::gru_cell<Real>(p.group_gru, h_comb, zero);
  GaussianDiag q = cib_encode(p, CibPath::Group, x_group);
  Vector c = sample_latent(q, mode);
  if (q_out) *q_out = std::move(q);
  return c;
}

inline GroupPrediction predict_group(const ModelParams& p, std::span<const Real> h_comb,
                                     std::span<const Real> z_q, const CandidateMatrix& X,
                                     const CibMode& mode) {
  GaussianDiag q;
  const Vector c = group_latent(p, h_comb, mode, &q);
  const Vector logits = candidate_logits(c, X);
  return {nn::softmax<Real>(logits), kl_diag(q, conditional_prior(p, CibPath::Group, z_q))};
}

struct EdgePrediction {
  Real probability = 0.5;
  Real kl = 0.0;
};

inline Real edge_probability_from_latent(const ModelParams& p, std::span<const Real> c) {
  const Vector hidden = nn::relu<Real>(nn::affine(p.edge_head_in, c));
  return nn::sigmoid(nn::affine(p.edge_head_out, std::span<const Real>(hidden))[0]);
}

inline Vector edge_latent(const ModelParams& p, std::span<const Real> h_comb_source,
                          std::span<const Real> x_new_group, std::span<const Real> z_q,
                          const CibMode& mode, GaussianDiag* q_out = nullptr) {
  const Vector feature = concat<Real>({h_comb_source, x_new_group, z_q});
  const Vector proj_hidden = nn::relu<Real>(nn::affine(p.edge_proj_in, std::span<const Real>(feature)));
  const Vector proj = nn::affine(p.edge_proj_out, std::span<const Real>(proj_hidden));
  const Vector zero(p.edge_gru.hidden(), 0.0);
  const Vector x_edge = nn::gru_cell<Real>(p.edge_gru, proj, zero);
  GaussianDiag q = cib_encode(p, CibPath::Edge, x_edge);
  Vector c = sample_latent(q, mode);
  if (q_out) *q_out = std::move(q);
  return c;
}

/// Probability of an edge from the step whose fused state is `h_comb_source`
/// into the newly selected group.
inline EdgePrediction predict_edge(const ModelParams& p, std::span<const Real> h_comb_source,
                                   std::span<const Real> x_new_group, std::span<const Real> z_q,
                                   const CibMode& mode) {
  GaussianDiag q;
  const Vector c = edge_latent(p, h_comb_source, x_new_group, z_q, mode, &q);
  return {edge_probability_from_latent(p, c), kl_diag(q, conditional_prior(p, CibPath::Edge, z_q))};
}

// ---------------------------------------------------------------------------
// Inference loop

template <class R>
concept UniformSource = requires(R r) {
  { r.uniform() } -> std::convertible_to<double>;
};

struct GenerateOptions {
  /// Never select END; generation runs for exactly max_steps steps.
  bool suppress_end = false;
  /// 0 selects the argmax group; > 0 samples from softmax(logits / temperature).
  double temperature = 0.0;
};

struct Generation {
  GroupGraph graph;
  bool truncated = false;  // stopped at max_steps without END
};

inline std::size_t argmax(std::span<const Real> v) {
  // lowest index wins ties
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Deterministic-mean generation. Edges into each new step are drawn as
/// Bernoulli(p) with `uniform() < p`; a step that draws none receives its
/// highest-probability edge.
template <UniformSource Rng>
Generation generate_graph(const ModelParams& p, const ModelConfig& config,
                          std::span<const Real> z_q, const CandidateMatrix& X, Rng& rng,
                          GenerateOptions opt = {}) {
  if (X.x.rows() < 2) throw ConfigError("generate_graph: candidate matrix has no groups");
  if (X.x.cols() != z_q.size()) throw ConfigError("generate_graph: dimension mismatch");
  const std::size_t end = X.end_index();
  const std::size_t cap = std::min(config.max_steps, p.step_embedding.rows());

  Generation out;
  std::vector<Vector> fused;  // h_comb cached per generated step
  Vector h_his(p.history.hidden(), 0.0);
  for (std::size_t t = 0;; ++t) {
    if (t == cap) {
      out.truncated = true;
      break;
    }
    if (t > 0) h_his = nn::gru_cell<Real>(p.history, X.row(out.graph.selected.back()), h_his);
    StepState s = fuse_task(p, h_his, z_q, t);

    Vector logits = candidate_logits(group_latent(p, s.h_comb, CibMode::infer()), X);
    if (opt.suppress_end) logits.pop_back();
    std::size_t choice;
    if (opt.temperature > 0.0) {
      for (auto& l : logits) l /= opt.temperature;
      const Vector probs = nn::softmax<Real>(logits);
      const double u = rng.uniform();
      double acc = 0.0;
      choice = probs.size() - 1;
      for (std::size_t k = 0; k < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) {
          choice = k;
          break;
        }
      }
    } else {
      choice = argmax(logits);
    }
    if (choice == end) break;

    out.graph.selected.push_back(choice);
    if (t > 0) {
      Real best_p = -1.0;
      std::size_t best_i = 0;
      bool any = false;
      for (std::size_t i = 0; i < t; ++i) {
        const Vector c = edge_latent(p, fused[i], X.row(choice), z_q, CibMode::infer());
        const Real prob = edge_probability_from_latent(p, c);
        if (rng.uniform() < prob) {
          out.graph.edges.insert({i, t});
          any = true;
        }
        if (prob > best_p) {
          best_p = prob;
          best_i = i;
        }
      }
      if (!any) out.graph.edges.insert({best_i, t});
    }
    fused.push_back(std::move(s.h_comb));
  }
  return out;
}

/// log P(graph | z_q) under the autoregressive factorization evaluated with
/// deterministic latents: group terms, a Bernoulli term for every ordered step
/// pair, and END after the last step unless the graph fills max_steps.
/// Connectivity is not required, so the full factorized space can be scored.
inline Real graph_log_likelihood(const ModelParams& p, const ModelConfig& config,
                                 std::span<const Real> z_q, const CandidateMatrix& X,
                                 const GroupGraph& graph) {
  GroupPool shape;
  shape.groups.resize(X.groups());
  for (std::size_t k = 0; k < X.groups(); ++k) shape.groups[k].id = k;
  require_valid(graph, shape, GraphCheck{.require_connectivity = false});
  const std::size_t cap = std::min(config.max_steps, p.step_embedding.rows());
  if (graph.steps() > cap)
    throw ValidationError("graph has " + std::to_string(graph.steps()) +
                          " steps, more than max_steps " + std::to_string(cap));

  Real ll = 0.0;
  std::vector<Vector> history;
  std::vector<Vector> fused;
  const std::size_t n = graph.steps();
  for (std::size_t t = 0; t <= n && t < cap; ++t) {
    const Vector h_his = aggregate_history(p, history);
    StepState s = fuse_task(p, h_his, z_q, t);
    const auto group = predict_group(p, s.h_comb, z_q, X, CibMode::infer());
    const std::size_t target = t < n ? graph.selected[t] : X.end_index();
    ll += std::log(group.probabilities[target]);
    if (t == n) break;
    const auto x_new = X.row(graph.selected[t]);
    for (std::size_t i = 0; i < t; ++i) {
      const Real prob = predict_edge(p, fused[i], x_new, z_q, CibMode::infer()).probability;
      ll += graph.has_edge(i, t) ? std::log(prob) : std::log1p(-prob);
    }
    history.emplace_back(x_new.begin(), x_new.end());
    fused.push_back(std::move(s.h_comb));
  }
  return ll;
}

}  // namespace goa
