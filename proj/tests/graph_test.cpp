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

#include <queue>

#include "goa/graph.hpp"
#include "goa/harness.hpp"
#include "goa/pool_library.hpp"
#include "goa/rng.hpp"

namespace {

using namespace goa;
using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

CandidateGroup group(std::size_t id, IntraTopology topo, std::vector<std::string> roles) {
  return {id, "G" + std::to_string(id), "stuff", std::move(roles), topo, "prompt " + std::to_string(id)};
}

GroupPool toy_pool() {
  GroupPool p;
  p.groups.push_back(group(0, IntraTopology::Single, {"A"}));
  p.groups.push_back(group(1, IntraTopology::Chain, {"A", "B", "C"}));
  p.groups.push_back(group(2, IntraTopology::Star, {"P", "S", "I"}));
  p.groups.push_back(group(3, IntraTopology::FullConnected, {"X", "Y", "Z"}));
  return p;
}

GroupGraph random_valid_graph(CounterRng& rng, std::size_t k, std::size_t max_steps) {
  GroupGraph g;
  const std::size_t n = 1 + rng.uniform_index(max_steps);
  for (std::size_t t = 0; t < n; ++t) g.selected.push_back(rng.uniform_index(k));
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t i = 0; i < t; ++i)
      if (rng.uniform() < 0.35) g.edges.insert({i, t});
    bool has = false;
    for (std::size_t i = 0; i < t; ++i) has = has || g.has_edge(i, t);
    if (!has) g.edges.insert({rng.uniform_index(t), t});
  }
  return g;
}

bool reaches(const AgentGraph& g, std::size_t from, std::size_t to) {
  std::vector<bool> seen(g.size(), false);
  std::queue<std::size_t> q;
  q.push(from);
  seen[from] = true;
  while (!q.empty()) {
    const auto a = q.front();
    q.pop();
    if (a == to) return true;
    for (auto b : g.successors(a))
      if (!seen[b]) {
        seen[b] = true;
        q.push(b);
      }
  }
  return false;
}

TEST(Pool, BundledMathPoolIsValidWithSixteenGroups) {
  const auto p = pools::math_pool();
  EXPECT_EQ(p.size(), 16u);
  EXPECT_EQ(p.end_index(), 16u);
  EXPECT_TRUE(validate_pool(p).ok()) << validate_pool(p).joined();
  std::map<IntraTopology, int> by_topo;
  for (const auto& g : p.groups) ++by_topo[g.intra_topology];
  EXPECT_EQ(by_topo[IntraTopology::Single], 4);
  EXPECT_EQ(by_topo[IntraTopology::Chain], 7);
  EXPECT_EQ(by_topo[IntraTopology::Star], 3);
  EXPECT_EQ(by_topo[IntraTopology::FullConnected], 2);
  for (const auto& g : p.groups)
    for (const auto& r : g.roles) EXPECT_NE(g.role_prompt.find(r), std::string::npos) << g.name;
}

TEST(Pool, DuplicateIdsAreReported) {
  auto p = toy_pool();
  p.groups[2].id = 1;
  const auto r = validate_pool(p);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.joined().find("duplicate id 1"), std::string::npos);
}

TEST(Pool, SingleWithTwoRolesAndEmptyRolesAreReported) {
  auto p = toy_pool();
  p.groups[0].roles = {"A", "B"};
  p.groups[1].roles.clear();
  const auto r = validate_pool(p);
  EXPECT_EQ(r.violations.size(), 2u);
}

TEST(Pool, EmptyPoolIsInvalid) { EXPECT_FALSE(validate_pool(GroupPool{}).ok()); }

TEST(GroupGraphValidation, MinimalChainIsOk) {
  const GroupGraph g{{0, 2}, {{0, 1}}};
  EXPECT_TRUE(validate_group_graph(g, toy_pool()).ok());
}

TEST(GroupGraphValidation, MissingIncomingEdgeIsNamed) {
  const GroupGraph g{{0, 1}, {}};
  const auto r = validate_group_graph(g, toy_pool());
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0], "step 1 has no incoming edge");
}

TEST(GroupGraphValidation, SelfLoopViolatesOrdering) {
  const GroupGraph g{{0}, {{0, 0}}};
  const auto r = validate_group_graph(g, toy_pool());
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.joined().find("edge must satisfy i < t"), std::string::npos);
}

TEST(GroupGraphValidation, OutOfPoolAndOutOfRangeAreReported) {
  const GroupGraph g{{0, 9}, {{0, 1}, {1, 4}}};
  const auto r = validate_group_graph(g, toy_pool());
  EXPECT_NE(r.joined().find("outside pool"), std::string::npos);
  EXPECT_NE(r.joined().find("1->4"), std::string::npos);
}

TEST(GroupGraphValidation, ConnectivityCanBeRelaxed) {
  const GroupGraph g{{0, 1}, {}};
  EXPECT_TRUE(validate_group_graph(g, toy_pool(), {.require_connectivity = false}).ok());
}

TEST(GroupGraphValidation, AcceptedGraphsAreDags) {
  CounterRng rng(11);
  const auto pool = toy_pool();
  for (int it = 0; it < 300; ++it) {
    GroupGraph g;
    const std::size_t n = 1 + rng.uniform_index(5);
    for (std::size_t t = 0; t < n; ++t) g.selected.push_back(rng.uniform_index(4));
    for (int e = 0; e < 6; ++e) g.edges.insert({rng.uniform_index(n), rng.uniform_index(n)});
    if (!validate_group_graph(g, pool, {.require_connectivity = false}).ok()) continue;
    for (const auto& e : g.edges) EXPECT_LT(e.from, e.to);
  }
}

TEST(IntraEdges, TemplatesPerTopology) {
  const auto p = toy_pool();
  EXPECT_TRUE(intra_edges(p.groups[0]).empty());
  EXPECT_EQ(intra_edges(p.groups[1]), (Edges{{0, 1}, {1, 2}}));
  EXPECT_EQ(intra_edges(p.groups[2]), (Edges{{0, 2}, {1, 2}}));
  EXPECT_EQ(intra_edges(p.groups[3]), (Edges{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(Materialize, CompositeOnlySinksFeedSummarizer) {
  const auto a = materialize_agent_graph({{0, 1}, {{0, 1}}}, toy_pool(), ExecutionMode::Composite);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.summarizer, 2u);
  EXPECT_EQ(a.edges, (Edges{{0, 1}, {1, 2}}));
  EXPECT_EQ(a.agents[0].system_prompt, "prompt 0");
  EXPECT_EQ(a.agents[1].source_step, 1u);
  EXPECT_FALSE(a.agents[2].source_step.has_value());
}

TEST(Materialize, ExpandedChainGroup) {
  const auto a = materialize_agent_graph({{1}, {}}, toy_pool(), ExecutionMode::Expanded);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a.edges, (Edges{{0, 1}, {1, 2}, {2, 3}}));
  EXPECT_EQ(a.agents[2].role, "C");
}

TEST(Materialize, ExpandedFullConnectedFormsTriangle) {
  const auto a = materialize_agent_graph({{3}, {}}, toy_pool(), ExecutionMode::Expanded);
  EXPECT_EQ(a.edges, (Edges{{0, 1}, {0, 2}, {1, 2}, {2, 3}}));
}

TEST(Materialize, ExpandedCrossGroupWiresSinksToSources) {
  // Star(P,S -> I) then Chain(A -> B -> C): I -> A
  const auto a = materialize_agent_graph({{2, 1}, {{0, 1}}}, toy_pool(), ExecutionMode::Expanded);
  EXPECT_EQ(a.edges, (Edges{{0, 2}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}}));
  // Chain then Star: C -> P and C -> S
  const auto b = materialize_agent_graph({{1, 2}, {{0, 1}}}, toy_pool(), ExecutionMode::Expanded);
  EXPECT_EQ(b.edges, (Edges{{0, 1}, {1, 2}, {2, 3}, {2, 4}, {3, 5}, {4, 5}, {5, 6}}));
}

TEST(Materialize, InvalidGraphThrows) {
  EXPECT_THROW(materialize_agent_graph({{0, 1}, {}}, toy_pool(), ExecutionMode::Composite),
               ValidationError);
}

TEST(Materialize, OutputIsAcyclicAndSummarizerReachable) {
  CounterRng rng(5);
  const auto pool = pools::math_pool();
  for (int it = 0; it < 300; ++it) {
    const auto g = random_valid_graph(rng, pool.size(), 6);
    for (auto mode : {ExecutionMode::Composite, ExecutionMode::Expanded}) {
      const auto a = materialize_agent_graph(g, pool, mode);
      ASSERT_NO_THROW(topological_schedule(a));
      EXPECT_TRUE(a.successors(a.summarizer).empty());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(reaches(a, i, a.summarizer));
      if (mode == ExecutionMode::Composite) {
        EXPECT_EQ(a.size(), g.steps() + 1);
      }
    }
  }
}

}  // namespace
