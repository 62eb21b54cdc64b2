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

// Teacher-forced objective with its hand-derived backward pass, the KL
// warm-up schedule and the minibatch training loop.

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "goa/embedding.hpp"
#include "goa/model.hpp"
#include "goa/optim.hpp"
#include "goa/params.hpp"

namespace goa {

struct LossBreakdown {
  Real l_group = 0.0;
  Real l_edge = 0.0;
  Real kl_group = 0.0;
  Real kl_edge = 0.0;
  Real total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o) {
    l_group += o.l_group;
    l_edge += o.l_edge;
    kl_group += o.kl_group;
    kl_edge += o.kl_edge;
    total += o.total;
    return *this;
  }
  LossBreakdown scaled(Real s) const {
    return {l_group * s, l_edge * s, kl_group * s, kl_edge * s, total * s};
  }

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct Betas {
  Real group = 0.0;
  Real edge = 0.0;
};

/// Supplies one noise vector per bottleneck sampling site. Sites are visited
/// by ascending step; within a step the group site comes first, then the edge
/// sites by ascending source step.
using EpsilonSource = std::function<Vector(std::size_t dim)>;

inline EpsilonSource gaussian_epsilon(CounterRng& rng) {
  return [&rng](std::size_t dim) {
    Vector v(dim);
    for (auto& x : v) x = rng.normal();
    return v;
  };
}

inline EpsilonSource zero_epsilon() {
  return [](std::size_t dim) { return Vector(dim, 0.0); };
}

/// Replays a fixed list of noise vectors in order.
inline EpsilonSource replay_epsilon(std::vector<Vector> draws) {
  auto state = std::make_shared<std::pair<std::vector<Vector>, std::size_t>>(std::move(draws), 0);
  return [state](std::size_t dim) {
    auto& [v, i] = *state;
    if (i >= v.size()) throw ConfigError("replay_epsilon: stream exhausted");
    if (v[i].size() != dim) throw ConfigError("replay_epsilon: dimension mismatch");
    return v[i++];
  };
}

inline constexpr Real kLogFloor = 1e-12;

/// Number of bottleneck sampling sites visited for a graph.
inline std::size_t epsilon_sites(const GroupGraph& g, std::size_t max_steps) {
  const std::size_t n = g.steps();
  return (n < max_steps ? n + 1 : n) + n * (n == 0 ? 0 : n - 1) / 2;
}

namespace detail {

struct GroupSiteCache {
  Real gate = 0.5;
  nn::GruCache<Real> gru;
  GaussianHeadCache head;
  GaussianDiag q;
  Vector eps;
  Vector c;
  Vector probs;
  std::size_t target = 0;
};

struct EdgeSiteCache {
  std::size_t source = 0;
  Vector feature, proj_pre, proj_hidden;
  nn::GruCache<Real> gru;
  GaussianHeadCache head;
  GaussianDiag q;
  Vector eps, c, head_pre, head_hidden;
  Real prob = 0.5;
  bool present = false;
};

}  // namespace detail

/// Teacher-forced loss of one trajectory. Ground-truth history is fed at every
/// step; the group term includes the terminal END prediction unless the graph
/// already fills max_steps. When `grads` is given, dL/dparams * grad_scale is
/// accumulated into it.
inline LossBreakdown teacher_forced_loss(const ModelParams& p, const ModelConfig& config,
                                         const Matrix& group_rows,
                                         std::span<const Real> query_embedding,
                                         const GroupGraph& graph, Betas betas,
                                         const EpsilonSource& epsilon,
                                         ModelParams* grads = nullptr, Real grad_scale = 1.0) {
  const std::size_t n = graph.steps();
  const std::size_t cap = std::min(config.max_steps, p.step_embedding.rows());
  if (n > cap)
    throw ValidationError("trajectory has " + std::to_string(n) + " steps, more than max_steps " +
                          std::to_string(cap));
  GroupPool shape;
  shape.groups.resize(group_rows.rows());
  for (std::size_t k = 0; k < shape.groups.size(); ++k) shape.groups[k].id = k;
  require_valid(graph, shape, GraphCheck{.require_connectivity = false});

  const std::size_t d = group_rows.cols();
  const Real sqrt_d = std::sqrt(static_cast<Real>(d));
  const CandidateMatrix X = assemble_candidate_matrix(group_rows, p);
  const std::size_t end = X.end_index();
  const std::size_t sites = n < cap ? n + 1 : n;

  TaskEncoderCache task_cache;
  const Vector zq = task_encoder_forward(p, query_embedding, &task_cache);
  GaussianHeadCache prior_g_cache, prior_e_cache;
  const GaussianDiag prior_g = gaussian_head(p.group_prior, zq, &prior_g_cache);
  const GaussianDiag prior_e = gaussian_head(p.edge_prior, zq, &prior_e_cache);

  std::vector<Vector> h_his(sites, Vector(d, 0.0));
  std::vector<nn::GruCache<Real>> hist_cache(sites);
  for (std::size_t t = 1; t < sites; ++t)
    h_his[t] = nn::gru_cell<Real>(p.history, X.row(graph.selected[t - 1]), h_his[t - 1],
                                  &hist_cache[t]);

  LossBreakdown loss;
  std::vector<Vector> h_comb(sites, Vector(d));
  std::vector<detail::GroupSiteCache> gsites(sites);
  std::vector<std::vector<detail::EdgeSiteCache>> esites(sites);
  const Vector zero(d, 0.0);

  for (std::size_t t = 0; t < sites; ++t) {
    auto& gs = gsites[t];
    gs.gate = nn::sigmoid(dot<Real>(h_his[t], zq) / sqrt_d);
    const auto pos = p.step_embedding.row(t);
    for (std::size_t k = 0; k < d; ++k)
      h_comb[t][k] = (1.0 - gs.gate) * h_his[t][k] + gs.gate * zq[k] + pos[k];

    const Vector x_group = nn::gru_cell<Real>(p.group_gru, h_comb[t], zero, &gs.gru);
    gs.q = gaussian_head(p.group_encoder, x_group, &gs.head);
    gs.eps = epsilon(d);
    gs.c = reparameterize(gs.q, gs.eps);
    gs.probs = nn::softmax<Real>(candidate_logits(gs.c, X));
    gs.target = t < n ? graph.selected[t] : end;
    loss.l_group -= std::log(std::max(gs.probs[gs.target], kLogFloor));
    loss.kl_group += kl_diag(gs.q, prior_g);

    if (t >= n) continue;
    const auto x_new = X.row(graph.selected[t]);
    for (std::size_t i = 0; i < t; ++i) {
      auto& es = esites[t].emplace_back();
      es.source = i;
      es.feature = concat<Real>({h_comb[i], x_new, zq});
      es.proj_pre = nn::affine(p.edge_proj_in, std::span<const Real>(es.feature));
      es.proj_hidden = nn::relu<Real>(es.proj_pre);
      const Vector proj = nn::affine(p.edge_proj_out, std::span<const Real>(es.proj_hidden));
      const Vector x_edge = nn::gru_cell<Real>(p.edge_gru, proj, zero, &es.gru);
      es.q = gaussian_head(p.edge_encoder, x_edge, &es.head);
      es.eps = epsilon(d);
      es.c = reparameterize(es.q, es.eps);
      es.head_pre = nn::affine(p.edge_head_in, std::span<const Real>(es.c));
      es.head_hidden = nn::relu<Real>(es.head_pre);
      es.prob = nn::sigmoid(nn::affine(p.edge_head_out, std::span<const Real>(es.head_hidden))[0]);
      es.present = graph.has_edge(i, t);
      loss.l_edge -= es.present ? std::log(std::max(es.prob, kLogFloor))
                                : std::log(std::max(1.0 - es.prob, kLogFloor));
      loss.kl_edge += kl_diag(es.q, prior_e);
    }
  }
  loss.total = loss.l_group + loss.l_edge + betas.group * loss.kl_group + betas.edge * loss.kl_edge;
  if (!grads) return loss;

  // ---- backward ----
  ModelParams& G = *grads;
  Vector g_zq(d, 0.0);
  std::vector<Vector> g_hcomb(sites, Vector(d, 0.0));
  Vector gpg_mu(d, 0.0), gpg_ls(d, 0.0), gpe_mu(d, 0.0), gpe_ls(d, 0.0);
  Vector g_end(d, 0.0);
  const std::size_t H = p.edge_head_in.out();

  for (std::size_t t = 0; t < sites; ++t) {
    for (const auto& es : esites[t]) {
      Real dlogit = 0.0;
      if (es.present) {
        if (es.prob >= kLogFloor) dlogit = -(1.0 - es.prob);
      } else if (1.0 - es.prob >= kLogFloor) {
        dlogit = es.prob;
      }
      dlogit *= grad_scale;
      Vector g_hidden(H, 0.0);
      nn::affine_backward<Real>(p.edge_head_out, es.head_hidden, std::span<const Real>(&dlogit, 1),
                                G.edge_head_out, g_hidden);
      const Vector g_head_pre = nn::relu_backward<Real>(es.head_pre, g_hidden);
      Vector g_mu(d, 0.0), g_ls(d, 0.0);
      nn::affine_backward<Real>(p.edge_head_in, es.c, g_head_pre, G.edge_head_in, g_mu);
      for (std::size_t k = 0; k < d; ++k) g_ls[k] = g_mu[k] * es.q.sigma(k) * es.eps[k];
      kl_diag_backward(es.q, prior_e, betas.edge * grad_scale, g_mu, g_ls, gpe_mu, gpe_ls);
      Vector g_xe(d, 0.0);
      gaussian_head_backward(p.edge_encoder, es.head, g_mu, g_ls, G.edge_encoder, g_xe);
      Vector g_proj(d, 0.0);
      nn::gru_cell_backward<Real>(p.edge_gru, es.gru, g_xe, G.edge_gru, g_proj, {});
      Vector g_proj_hidden(es.proj_hidden.size(), 0.0);
      nn::affine_backward<Real>(p.edge_proj_out, es.proj_hidden, g_proj, G.edge_proj_out,
                                g_proj_hidden);
      const Vector g_proj_pre = nn::relu_backward<Real>(es.proj_pre, g_proj_hidden);
      Vector g_feature(3 * d, 0.0);
      nn::affine_backward<Real>(p.edge_proj_in, es.feature, g_proj_pre, G.edge_proj_in, g_feature);
      for (std::size_t k = 0; k < d; ++k) {
        g_hcomb[es.source][k] += g_feature[k];
        g_zq[k] += g_feature[2 * d + k];
      }
    }

    const auto& gs = gsites[t];
    Vector g_logits = gs.probs;
    if (gs.probs[gs.target] >= kLogFloor) {
      g_logits[gs.target] -= 1.0;
      for (auto& v : g_logits) v *= grad_scale;
    } else {
      std::fill(g_logits.begin(), g_logits.end(), 0.0);
    }
    Vector g_mu(d, 0.0), g_ls(d, 0.0);
    for (std::size_t k = 0; k < X.x.rows(); ++k) axpy<Real>(g_logits[k], X.row(k), g_mu);
    axpy<Real>(g_logits[end], gs.c, g_end);
    for (std::size_t k = 0; k < d; ++k) g_ls[k] = g_mu[k] * gs.q.sigma(k) * gs.eps[k];
    kl_diag_backward(gs.q, prior_g, betas.group * grad_scale, g_mu, g_ls, gpg_mu, gpg_ls);
    Vector g_xg(d, 0.0);
    gaussian_head_backward(p.group_encoder, gs.head, g_mu, g_ls, G.group_encoder, g_xg);
    nn::gru_cell_backward<Real>(p.group_gru, gs.gru, g_xg, G.group_gru, g_hcomb[t], {});
  }

  // fusion and history, newest step first
  Vector carry(d, 0.0);
  for (std::size_t t = sites; t-- > 0;) {
    const auto& ghc = g_hcomb[t];
    axpy<Real>(1.0, ghc, G.step_embedding.row(t));
    const Real g = gsites[t].gate;
    Vector g_hh = carry;
    Real dgate = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      g_hh[k] += (1.0 - g) * ghc[k];
      g_zq[k] += g * ghc[k];
      dgate += ghc[k] * (zq[k] - h_his[t][k]);
    }
    const Real ds = dgate * g * (1.0 - g) / sqrt_d;
    for (std::size_t k = 0; k < d; ++k) {
      g_hh[k] += ds * zq[k];
      g_zq[k] += ds * h_his[t][k];
    }
    std::fill(carry.begin(), carry.end(), 0.0);
    if (t >= 1) nn::gru_cell_backward<Real>(p.history, hist_cache[t], g_hh, G.history, {}, carry);
  }

  gaussian_head_backward(p.group_prior, prior_g_cache, gpg_mu, gpg_ls, G.group_prior, g_zq);
  gaussian_head_backward(p.edge_prior, prior_e_cache, gpe_mu, gpe_ls, G.edge_prior, g_zq);
  axpy<Real>(1.0, g_end, G.end_embedding.values());
  task_encoder_backward(p, task_cache, g_zq, G);
  return loss;
}

// ---------------------------------------------------------------------------
// Schedule and loop

/// Linear warm-up: beta_target * min(1, epoch / warmup_epochs).
inline Real kl_warmup(std::size_t epoch, std::size_t warmup_epochs, Real beta_target) {
  if (warmup_epochs == 0) return beta_target;
  if (epoch >= warmup_epochs) return beta_target;
  return beta_target * (static_cast<Real>(epoch) / static_cast<Real>(warmup_epochs));
}

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t warmup = 10;
  std::size_t batch = 40;
  AdamwHyper optimizer{};
  Real beta_g_target = 0.0;
  Real beta_e_target = 0.3;
  std::uint64_t seed = 0;
  std::size_t start_epoch = 0;  // > 0 when resuming; epochs is the final epoch count

  void validate() const {
    if (warmup > epochs) throw ConfigError("TrainConfig: warmup must not exceed epochs");
    if (start_epoch > epochs) throw ConfigError("TrainConfig: start_epoch exceeds epochs");
    if (batch == 0) throw ConfigError("TrainConfig: batch must be at least 1");
  }
};

struct TrainingExample {
  Vector query_embedding;
  GroupGraph graph;
};

struct EpochLog {
  std::size_t epoch = 0;
  Real beta_g = 0.0;
  Real beta_e = 0.0;
  LossBreakdown mean;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  ModelParams params;
  OptimizerState<Real> optimizer;
  std::vector<EpochLog> log;
};

inline std::vector<TrainingExample> make_examples(const EmbeddingProvider& provider,
                                                  const std::vector<Trajectory>& dataset) {
  std::vector<std::string> texts;
  for (const auto& t : dataset) texts.push_back(t.query);
  auto vecs = embed_texts(provider, texts);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) out.push_back({std::move(vecs[i]), dataset[i].graph});
  return out;
}

using EpochCallback = std::function<void(const EpochLog&)>;

/// Minibatch AdamW over teacher-forced losses. Each epoch reshuffles with a
/// stream derived from the seed; per-batch losses and gradients are averaged
/// over the batch.
inline TrainResult train(ModelParams params, const ModelConfig& config, const Matrix& group_rows,
                         const std::vector<TrainingExample>& data, const TrainConfig& tc,
                         std::optional<OptimizerState<Real>> resume = std::nullopt,
                         const EpochCallback& on_epoch = {}) {
  tc.validate();
  if (data.empty()) throw ConfigError("train: dataset is empty");
  TrainResult result{std::move(params), {}, {}};
  result.optimizer = resume ? std::move(*resume) : make_optimizer_state<Real>(result.params, tc.optimizer);
  result.optimizer.hyper = tc.optimizer;
  const CounterRng root(tc.seed);

  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = tc.start_epoch; epoch < tc.epochs; ++epoch) {
    const Betas betas{kl_warmup(epoch, tc.warmup, tc.beta_g_target),
                      kl_warmup(epoch, tc.warmup, tc.beta_e_target)};
    CounterRng shuffle = root.fork(2 * epoch);
    CounterRng noise = root.fork(2 * epoch + 1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
    const EpsilonSource eps = gaussian_epsilon(noise);

    LossBreakdown epoch_sum;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + tc.batch);
      const Real scale = 1.0 / static_cast<Real>(stop - start);
      ModelParams grads = result.params.zeros_like();
      for (std::size_t k = start; k < stop; ++k) {
        const auto& ex = data[order[k]];
        const auto l = teacher_forced_loss(result.params, config, group_rows, ex.query_embedding,
                                           ex.graph, betas, eps, &grads, scale);
        if (!std::isfinite(l.total))
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index));
        epoch_sum += l;
      }
      try {
        adamw_step(result.optimizer, result.params, grads);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_index));
      }
    }
    EpochLog entry{epoch, betas.group, betas.edge,
                   epoch_sum.scaled(1.0 / static_cast<Real>(data.size()))};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

}  // namespace goa
