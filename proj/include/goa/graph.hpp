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
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "goa/error.hpp"

namespace goa {

enum class IntraTopology { Single, Chain, Star, FullConnected };

inline std::string_view to_string(IntraTopology t) {
  switch (t) {
    case IntraTopology::Single: return "Single";
    case IntraTopology::Chain: return "Chain";
    case IntraTopology::Star: return "Star";
    case IntraTopology::FullConnected: return "FullConnected";
  }
  return "?";
}

inline std::optional<IntraTopology> parse_intra_topology(std::string_view s) {
  for (auto t : {IntraTopology::Single, IntraTopology::Chain, IntraTopology::Star,
                 IntraTopology::FullConnected})
    if (s == to_string(t)) return t;
  return std::nullopt;
}

/// A reusable collaboration unit: a fixed set of roles wired by a fixed
/// internal template.
struct CandidateGroup {
  std::size_t id = 0;
  std::string name;
  std::string expertise;
  std::vector<std::string> roles;
  IntraTopology intra_topology = IntraTopology::Single;
  std::string role_prompt;  // composite prompt describing every internal role

  friend bool operator==(const CandidateGroup&, const CandidateGroup&) = default;
};

struct GroupPool {
  std::vector<CandidateGroup> groups;

  std::size_t size() const noexcept { return groups.size(); }
  /// Slot of the END token in the candidate matrix.
  std::size_t end_index() const noexcept { return groups.size(); }

  friend bool operator==(const GroupPool&, const GroupPool&) = default;
};

/// Directed information flow from generation step `from` to step `to`.
struct StepEdge {
  std::size_t from = 0;
  std::size_t to = 0;

  friend auto operator<=>(const StepEdge&, const StepEdge&) = default;
};

/// Ordered group selections plus inter-group edges between steps.
struct GroupGraph {
  std::vector<std::size_t> selected;  // pool ids, repeats allowed
  std::set<StepEdge> edges;

  std::size_t steps() const noexcept { return selected.size(); }
  bool has_edge(std::size_t from, std::size_t to) const { return edges.contains({from, to}); }

  friend bool operator==(const GroupGraph&, const GroupGraph&) = default;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string joined() const {
    std::string out;
    for (const auto& v : violations) out += (out.empty() ? "" : "; ") + v;
    return out;
  }
};

inline ValidationReport validate_pool(const GroupPool& pool) {
  ValidationReport r;
  if (pool.groups.empty()) r.violations.push_back("pool must contain at least one group");
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < pool.groups.size(); ++i) {
    const auto& g = pool.groups[i];
    const std::string tag = "group " + std::to_string(i) + " ('" + g.name + "')";
    if (!seen.insert(g.id).second)
      r.violations.push_back(tag + ": duplicate id " + std::to_string(g.id));
    else if (g.id != i)
      r.violations.push_back(tag + ": id " + std::to_string(g.id) + " must equal its index");
    if (g.roles.empty()) r.violations.push_back(tag + ": roles must be non-empty");
    if (g.intra_topology == IntraTopology::Single && g.roles.size() != 1)
      r.violations.push_back(tag + ": Single topology requires exactly one role");
    if (g.name.empty()) r.violations.push_back(tag + ": name must be non-empty");
  }
  return r;
}

struct GraphCheck {
  /// Every step t >= 1 must have an incoming edge. Generation guarantees this;
  /// likelihood evaluation over the full factorized space does not need it.
  bool require_connectivity = true;
};

inline ValidationReport validate_group_graph(const GroupGraph& graph, const GroupPool& pool,
                                             GraphCheck check = {}) {
  ValidationReport r;
  const std::size_t n = graph.selected.size();
  for (std::size_t t = 0; t < n; ++t)
    if (graph.selected[t] >= pool.size())
      r.violations.push_back("step " + std::to_string(t) + " selects group " +
                             std::to_string(graph.selected[t]) + " outside pool of size " +
                             std::to_string(pool.size()));
  std::vector<bool> has_incoming(n, false);
  for (const auto& e : graph.edges) {
    const std::string tag = "edge " + std::to_string(e.from) + "->" + std::to_string(e.to);
    if (e.from >= e.to) {
      r.violations.push_back(tag + ": edge must satisfy i < t");
      continue;
    }
    if (e.to >= n) {
      r.violations.push_back(tag + ": step " + std::to_string(e.to) +
                             " is beyond the selection of size " + std::to_string(n));
      continue;
    }
    has_incoming[e.to] = true;
  }
  if (check.require_connectivity)
    for (std::size_t t = 1; t < n; ++t)
      if (!has_incoming[t])
        r.violations.push_back("step " + std::to_string(t) + " has no incoming edge");
  return r;
}

inline void require_valid(const GroupGraph& graph, const GroupPool& pool, GraphCheck check = {}) {
  auto report = validate_group_graph(graph, pool, check);
  if (!report.ok()) throw ValidationError("invalid group graph: " + report.joined());
}

/// Wiring inside one group as (role index -> role index) pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> intra_edges(const CandidateGroup& g) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  const std::size_t n = g.roles.size();
  switch (g.intra_topology) {
    case IntraTopology::Single:
      break;
    case IntraTopology::Chain:
      for (std::size_t k = 0; k + 1 < n; ++k) e.emplace_back(k, k + 1);
      break;
    case IntraTopology::Star:  // every other role feeds the last listed role
      for (std::size_t k = 0; k + 1 < n; ++k) e.emplace_back(k, n - 1);
      break;
    case IntraTopology::FullConnected:
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) e.emplace_back(j, k);
      break;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Agent-level graph

enum class ExecutionMode { Composite, Expanded };

inline std::string_view to_string(ExecutionMode m) {
  return m == ExecutionMode::Composite ? "composite" : "expanded";
}

inline constexpr std::string_view kSummarizerRole = "Summarizer";
inline constexpr std::string_view kSummarizerPrompt =
    "You are the summarizer. Read the responses of the upstream agents and state the single "
    "final answer to the task.";

struct AgentGraph {
  struct Agent {
    std::string role;
    std::string system_prompt;
    std::optional<std::size_t> source_step;  // empty for the summarizer
  };

  std::vector<Agent> agents;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t summarizer = 0;

  std::size_t size() const noexcept { return agents.size(); }

  /// Direct predecessors of `agent`, ascending.
  std::vector<std::size_t> predecessors(std::size_t agent) const {
    std::vector<std::size_t> out;
    for (auto [a, b] : edges)
      if (b == agent) out.push_back(a);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<std::size_t> successors(std::size_t agent) const {
    std::vector<std::size_t> out;
    for (auto [a, b] : edges)
      if (a == agent) out.push_back(b);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

inline std::string expanded_role_prompt(const CandidateGroup& g, const std::string& role) {
  return "You act as " + role + " inside the " + g.name + ". Group expertise: " + g.expertise +
         ".";
}

/// Turns a group-level graph into an executable agent graph. A summarizer is
/// appended and fed by every agent without outgoing edges.
inline AgentGraph materialize_agent_graph(const GroupGraph& graph, const GroupPool& pool,
                                          ExecutionMode mode) {
  require_valid(graph, pool);
  AgentGraph out;
  // per step: agent indices of the group's sources and sinks
  std::vector<std::vector<std::size_t>> sources(graph.steps()), sinks(graph.steps());

  for (std::size_t t = 0; t < graph.steps(); ++t) {
    const auto& g = pool.groups[graph.selected[t]];
    if (mode == ExecutionMode::Composite) {
      const std::size_t idx = out.agents.size();
      out.agents.push_back({g.name, g.role_prompt, t});
      sources[t] = {idx};
      sinks[t] = {idx};
      continue;
    }
    const std::size_t base = out.agents.size();
    for (const auto& role : g.roles) out.agents.push_back({role, expanded_role_prompt(g, role), t});
    const auto intra = intra_edges(g);
    std::vector<bool> has_in(g.roles.size(), false), has_out(g.roles.size(), false);
    for (auto [a, b] : intra) {
      out.edges.emplace_back(base + a, base + b);
      has_out[a] = true;
      has_in[b] = true;
    }
    for (std::size_t k = 0; k < g.roles.size(); ++k) {
      if (!has_in[k]) sources[t].push_back(base + k);
      if (!has_out[k]) sinks[t].push_back(base + k);
    }
  }

  for (const auto& e : graph.edges)
    for (std::size_t a : sinks[e.from])
      for (std::size_t b : sources[e.to]) out.edges.emplace_back(a, b);

  std::vector<bool> has_out(out.agents.size(), false);
  for (auto [a, b] : out.edges) has_out[a] = true;
  out.summarizer = out.agents.size();
  out.agents.push_back({std::string(kSummarizerRole), std::string(kSummarizerPrompt), std::nullopt});
  for (std::size_t a = 0; a < out.summarizer; ++a)
    if (!has_out[a]) out.edges.emplace_back(a, out.summarizer);
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

/// A curated (query, ground-truth graph) pair with its exploration outcome.
struct Trajectory {
  std::string query;
  std::string gold;
  GroupGraph graph;
  bool success = true;
  std::uint64_t token_cost = 0;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace goa
