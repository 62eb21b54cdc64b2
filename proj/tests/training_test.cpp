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

#include <gtest/gtest.h>

#include <cmath>

#include "goa/embedding.hpp"
#include "goa/gradcheck.hpp"
#include "goa/model.hpp"
#include "goa/training.hpp"
#include "test_util.hpp"

namespace {

using namespace goa;
using goa::testing::small_config;

Matrix unit_rows(std::size_t k, std::size_t d, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix rows(k, d);
  goa::testing::fill_random(rows, rng);
  for (std::size_t r = 0; r < k; ++r) {
    Vector v(rows.row(r).begin(), rows.row(r).end());
    l2_normalize(v);
    std::copy(v.begin(), v.end(), rows.row(r).begin());
  }
  return rows;
}

Vector query_vec(std::size_t d, std::uint64_t seed) {
  CounterRng rng(seed);
  auto v = goa::testing::random_vector(d, rng);
  l2_normalize(v);
  return v;
}

TEST(Warmup, Examples) {
  EXPECT_EQ(kl_warmup(0, 10, 0.3), 0.0);
  EXPECT_EQ(kl_warmup(10, 10, 0.3), 0.3);
  EXPECT_EQ(kl_warmup(25, 10, 0.3), 0.3);
  EXPECT_NEAR(kl_warmup(5, 10, 0.3), 0.15, 1e-15);
  EXPECT_EQ(kl_warmup(0, 0, 0.3), 0.3);
}

TEST(Warmup, MonotoneAndExactAtHalfForEvenWarmup) {
  for (std::size_t w : {2u, 4u, 10u, 16u}) {
    for (double target : {0.3, 1.0, 0.7}) {
      double prev = -1.0;
      for (std::size_t e = 0; e <= 3 * w; ++e) {
        const double b = kl_warmup(e, w, target);
        EXPECT_GE(b, prev);
        prev = b;
      }
      EXPECT_EQ(kl_warmup(w / 2, w, target), target / 2.0);
      EXPECT_EQ(kl_warmup(w, w, target), target);
    }
  }
}

TEST(EpsilonSites, CountsGroupAndEdgeSites) {
  EXPECT_EQ(epsilon_sites(GroupGraph{}, 8), 1u);
  EXPECT_EQ(epsilon_sites({{1, 2, 3}, {{0, 1}, {1, 2}}}, 8), 4u + 3u);
  EXPECT_EQ(epsilon_sites({{1, 2}, {{0, 1}}}, 2), 2u + 1u);
}

TEST(Loss, ZeroBetasGiveReconstructionOnly) {
  const auto c = small_config();
  const auto p = ModelParams::random(c, 2);
  const auto rows = unit_rows(c.K, c.d, 1);
  CounterRng rng(9);
  const GroupGraph g{{2, 0, 3}, {{0, 1}, {0, 2}}};
  const auto l = teacher_forced_loss(p, c, rows, query_vec(c.d, 3), g, {0.0, 0.0},
                                     gaussian_epsilon(rng));
  EXPECT_GT(l.kl_group, 0.0);
  EXPECT_EQ(l.total, l.l_group + l.l_edge);
}

TEST(Loss, IdenticalPosteriorAndPriorGiveZeroKl) {
  const auto c = small_config();
  auto p = ModelParams::random(c, 2);
  for (auto* head : {&p.group_encoder, &p.edge_encoder, &p.group_prior, &p.edge_prior}) {
    head->mu.W.fill(0.0);
    head->mu.b.fill(0.0);
    head->log_sigma.W.fill(0.0);
    head->log_sigma.b.fill(0.0);
  }
  CounterRng rng(1);
  const auto l = teacher_forced_loss(p, c, unit_rows(c.K, c.d, 1), query_vec(c.d, 3),
                                     {{1, 1}, {{0, 1}}}, {0.5, 0.5}, gaussian_epsilon(rng));
  EXPECT_EQ(l.kl_group, 0.0);
  EXPECT_EQ(l.kl_edge, 0.0);
}

TEST(Loss, RiggedModelHasNearZeroReconstructionLoss) {
  // One group; step 0 must pick it, step 1 must pick END.
  const auto c = small_config(16, 8, 1, 8);
  auto p = ModelParams::zeros(c);
  const Matrix rows = unit_rows(1, c.d, 4);
  for (std::size_t i = 0; i < c.d; ++i) {
    p.step_embedding(0, i) = 50.0 * rows(0, i);
    p.step_embedding(1, i) = -50.0 * rows(0, i);
    p.group_gru.Wn(i, i) = 1.0;
    p.group_encoder.mu.W(i, i) = 100.0;
    p.end_embedding(i, 0) = -rows(0, i);
  }
  const auto l = teacher_forced_loss(p, c, rows, Vector(c.d, 0.0), {{0}, {}}, {0.0, 0.0},
                                     zero_epsilon());
  EXPECT_LT(l.l_group + l.l_edge, 1e-6);
}

TEST(Loss, MatchesNegativeLikelihoodWithZeroNoise) {
  const auto c = small_config(16, 8, 4, 4);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = ModelParams::random(c, s);
    const auto rows = unit_rows(c.K, c.d, s);
    const auto q = query_vec(c.d, s + 50);
    const auto z = task_encoder_forward(p, q);
    const auto X = assemble_candidate_matrix(rows, p);
    for (const GroupGraph& g : {GroupGraph{}, GroupGraph{{3}, {}}, GroupGraph{{1, 2, 1}, {{0, 2}, {1, 2}, {0, 1}}},
                                GroupGraph{{0, 1, 2, 3}, {{0, 1}, {1, 2}, {2, 3}}}}) {
      const auto l = teacher_forced_loss(p, c, rows, q, g, {0.0, 0.0}, zero_epsilon());
      EXPECT_NEAR(l.total, -graph_log_likelihood(p, c, z, X, g), 1e-10);
    }
  }
}

TEST(Loss, SameNoiseStreamReproducesLoss) {
  const auto c = small_config();
  const auto p = ModelParams::random(c, 2);
  const auto rows = unit_rows(c.K, c.d, 1);
  const GroupGraph g{{2, 0, 3}, {{0, 1}, {1, 2}}};
  CounterRng a(5), b(5);
  const auto la = teacher_forced_loss(p, c, rows, query_vec(c.d, 1), g, {0.1, 0.3}, gaussian_epsilon(a));
  const auto lb = teacher_forced_loss(p, c, rows, query_vec(c.d, 1), g, {0.1, 0.3}, gaussian_epsilon(b));
  EXPECT_EQ(la, lb);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  const auto c = small_config();
  const auto base = ModelParams::random(c, 31);
  const auto rows = unit_rows(c.K, c.d, 22);
  const auto q = query_vec(c.d, 23);
  const GroupGraph g{{1, 3}, {{0, 1}}};
  CounterRng rng(24);
  std::vector<Vector> draws;
  for (std::size_t i = 0; i < epsilon_sites(g, c.max_steps); ++i)
    draws.push_back(goa::testing::random_vector(c.d, rng));
  const Betas betas{0.4, 0.3};

  auto objective = [&](std::span<const double> x, std::span<double> grad) {
    ModelParams p = base;
    p.unflatten(x);
    if (grad.empty())
      return teacher_forced_loss(p, c, rows, q, g, betas, replay_epsilon(draws)).total;
    ModelParams gp = p.zeros_like();
    const auto l = teacher_forced_loss(p, c, rows, q, g, betas, replay_epsilon(draws), &gp);
    const auto flat = gp.flatten();
    std::copy(flat.begin(), flat.end(), grad.begin());
    return l.total;
  };
  GradCheckOptions opt;
  opt.step = 1e-3;
  opt.order = 4;
  opt.max_coordinates = 1500;
  opt.seed = 3;
  const auto report = finite_diff_check(objective, base.flatten(), opt);
  EXPECT_LT(report.max_relative_error, 1e-4) << "worst index " << report.worst_index << " a=" << report.worst_analytic << " n=" << report.worst_numeric;
}

TEST(Loss, UnknownGroupIsRejected) {
  const auto c = small_config();
  EXPECT_THROW(teacher_forced_loss(ModelParams::random(c, 1), c, unit_rows(c.K, c.d, 1),
                                   query_vec(c.d, 1), {{7}, {}}, {}, zero_epsilon()),
               ValidationError);
}

std::vector<TrainingExample> toy_data(const ModelConfig& c) {
  return {{query_vec(c.d, 1), {{0, 2}, {{0, 1}}}},
          {query_vec(c.d, 2), {{3}, {}}},
          {query_vec(c.d, 3), {{1, 1, 2}, {{0, 1}, {0, 2}}}}};
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto c = small_config();
  const auto p = ModelParams::random(c, 1);
  TrainConfig tc;
  tc.epochs = 3;
  tc.warmup = 1;
  tc.batch = 2;
  tc.optimizer.lr = 0.0;
  tc.optimizer.weight_decay = 0.0;
  const auto r = train(p, c, unit_rows(c.K, c.d, 1), toy_data(c), tc);
  EXPECT_TRUE(r.params == p);
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.optimizer.step, 6u);
}

TEST(Train, SeededRunsAreBitIdenticalAndLossDecreases) {
  const auto c = small_config();
  TrainConfig tc;
  tc.epochs = 30;
  tc.warmup = 4;
  tc.batch = 2;
  tc.optimizer.lr = 1e-2;
  tc.seed = 17;
  const auto rows = unit_rows(c.K, c.d, 1);
  const auto a = train(ModelParams::random(c, 1), c, rows, toy_data(c), tc);
  const auto b = train(ModelParams::random(c, 1), c, rows, toy_data(c), tc);
  EXPECT_EQ(a.log, b.log);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_LT(a.log.back().mean.l_group + a.log.back().mean.l_edge,
            a.log.front().mean.l_group + a.log.front().mean.l_edge);
  EXPECT_EQ(a.log[2].beta_e, kl_warmup(2, 4, 0.3));
}

TEST(Train, ResumingReproducesAnUninterruptedRun) {
  const auto c = small_config();
  const auto rows = unit_rows(c.K, c.d, 1);
  TrainConfig tc;
  tc.epochs = 6;
  tc.warmup = 3;
  tc.batch = 2;
  tc.optimizer.lr = 5e-3;
  tc.seed = 2;
  const auto full = train(ModelParams::random(c, 1), c, rows, toy_data(c), tc);
  TrainConfig first = tc;
  first.epochs = 3;
  const auto head = train(ModelParams::random(c, 1), c, rows, toy_data(c), first);
  TrainConfig second = tc;
  second.start_epoch = 3;
  const auto tail = train(head.params, c, rows, toy_data(c), second, head.optimizer);
  EXPECT_TRUE(tail.params == full.params);
  ASSERT_EQ(tail.log.size(), 3u);
  EXPECT_EQ(tail.log[0], full.log[3]);
}

TEST(Train, InvalidConfigurations) {
  const auto c = small_config();
  TrainConfig tc;
  tc.epochs = 5;
  tc.warmup = 6;
  EXPECT_THROW(train(ModelParams::random(c, 1), c, unit_rows(c.K, c.d, 1), toy_data(c), tc),
               ConfigError);
  tc.warmup = 1;
  tc.batch = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc.batch = 1;
  EXPECT_THROW(train(ModelParams::random(c, 1), c, unit_rows(c.K, c.d, 1), {}, tc), ConfigError);
}

TEST(Train, NonFiniteGradientNamesEpochAndBatch) {
  const auto c = small_config();
  auto p = ModelParams::random(c, 1);
  p.edge_head_out.W(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 2;
  tc.warmup = 0;
  tc.batch = 3;
  try {
    train(p, c, unit_rows(c.K, c.d, 1), toy_data(c), tc);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("batch 0"), std::string::npos) << e.what();
  }
}

}  // namespace
