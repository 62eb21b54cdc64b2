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

// Heuristic exploration: sample template topologies per query, execute them,
// and keep the smallest graph that succeeded.

#include <algorithm>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "goa/graph.hpp"
#include "goa/rng.hpp"
#include "goa/task.hpp"

namespace goa {

enum class TopologyFamily { Chain, Star, FullConnected };

inline std::string_view to_string(TopologyFamily f) {
  switch (f) {
    case TopologyFamily::Chain: return "Chain";
    case TopologyFamily::Star: return "Star";
    case TopologyFamily::FullConnected: return "FullConnected";
  }
  return "?";
}

/// Uniform-with-replacement group choice wired by a family template:
/// Chain i -> i+1, Star 0 -> t (step 0 is the hub), FullConnected every i < t.
inline GroupGraph sample_candidate_topology(const GroupPool& pool, TopologyFamily family,
                                            std::size_t n_groups, CounterRng& rng,
                                            std::size_t max_steps = 8) {
  if (n_groups < 1 || n_groups > max_steps)
    throw ConfigError("sample_candidate_topology: n_groups " + std::to_string(n_groups) +
                      " outside [1, " + std::to_string(max_steps) + "]");
  if (pool.groups.empty()) throw ConfigError("sample_candidate_topology: empty pool");
  GroupGraph g;
  for (std::size_t t = 0; t < n_groups; ++t) g.selected.push_back(rng.uniform_index(pool.size()));
  for (std::size_t t = 1; t < n_groups; ++t) {
    switch (family) {
      case TopologyFamily::Chain: g.edges.insert({t - 1, t}); break;
      case TopologyFamily::Star: g.edges.insert({0, t}); break;
      case TopologyFamily::FullConnected:
        for (std::size_t i = 0; i < t; ++i) g.edges.insert({i, t});
        break;
    }
  }
  require_valid(g, pool);
  return g;
}

struct ExplorationConfig {
  std::vector<TopologyFamily> families{TopologyFamily::Chain, TopologyFamily::Star,
                                       TopologyFamily::FullConnected};
  std::size_t min_groups = 1;
  std::size_t max_groups = 3;
  std::size_t samples_per_query = 8;
  std::size_t max_steps = 8;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // > 1 executes samples of a query concurrently

  void validate() const {
    if (families.empty()) throw ConfigError("ExplorationConfig: no topology families");
    if (min_groups < 1 || min_groups > max_groups || max_groups > max_steps)
      throw ConfigError("ExplorationConfig: group-count range must lie within [1, max_steps]");
  }
};

/// Answer and token cost of executing one graph on one query.
struct ExecResult {
  std::string answer;
  std::uint64_t tokens = 0;
};

/// Pluggable execution backend. May throw; failures are recorded per sample.
using Executor = std::function<ExecResult(const QueryItem&, const GroupGraph&)>;

struct ExplorationRecord {
  std::size_t query_index = 0;
  std::size_t sample = 0;
  std::string query;
  std::string gold;
  TopologyFamily family = TopologyFamily::Chain;
  GroupGraph graph;
  bool success = false;
  std::string answer;
  std::uint64_t tokens = 0;
  std::optional<std::string> error;

  friend bool operator==(const ExplorationRecord&, const ExplorationRecord&) = default;
};

inline ExplorationRecord run_sample(const Executor& exec, const QueryItem& q, ExplorationRecord rec) {
  try {
    const auto r = exec(q, rec.graph);
    rec.answer = r.answer;
    rec.tokens = r.tokens;
    rec.success = answer_matches(q, r.answer);
  } catch (const std::exception& e) {
    rec.success = false;
    rec.error = e.what();
  }
  return rec;
}

/// Samples `samples_per_query` topologies for every query and labels each by
/// executing it. Output is ordered by (query, sample) regardless of threading.
inline std::vector<ExplorationRecord> explore_and_label(const std::vector<QueryItem>& queries,
                                                        const GroupPool& pool,
                                                        const Executor& executor,
                                                        const ExplorationConfig& cfg) {
  cfg.validate();
  const CounterRng root(cfg.seed);
  std::vector<ExplorationRecord> out;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    CounterRng rng = root.fork(qi);
    std::vector<ExplorationRecord> pending;
    for (std::size_t s = 0; s < cfg.samples_per_query; ++s) {
      ExplorationRecord rec;
      rec.query_index = qi;
      rec.sample = s;
      rec.query = queries[qi].query;
      rec.gold = queries[qi].gold;
      rec.family = cfg.families[rng.uniform_index(cfg.families.size())];
      const std::size_t n =
          cfg.min_groups + rng.uniform_index(cfg.max_groups - cfg.min_groups + 1);
      rec.graph = sample_candidate_topology(pool, rec.family, n, rng, cfg.max_steps);
      pending.push_back(std::move(rec));
    }
    if (cfg.threads <= 1) {
      for (auto& rec : pending) out.push_back(run_sample(executor, queries[qi], std::move(rec)));
      continue;
    }
    for (std::size_t start = 0; start < pending.size(); start += cfg.threads) {
      std::vector<std::future<ExplorationRecord>> running;
      const std::size_t stop = std::min(pending.size(), start + cfg.threads);
      for (std::size_t k = start; k < stop; ++k)
        running.push_back(std::async(std::launch::async, run_sample, std::cref(executor),
                                     std::cref(queries[qi]), pending[k]));
      for (auto& f : running) out.push_back(f.get());
    }
  }
  return out;
}

struct CurationResult {
  std::vector<Trajectory> dataset;
  std::vector<std::string> excluded;  // queries without any successful graph
};

/// Ordering used to pick the minimal viable topology: fewer groups, then fewer
/// edges, then lexicographic selection and edge list.
inline auto minimality_key(const GroupGraph& g) {
  return std::make_tuple(g.steps(), g.edges.size(), g.selected,
                         std::vector<StepEdge>(g.edges.begin(), g.edges.end()));
}

inline CurationResult curate_minimal(const std::vector<ExplorationRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, const ExplorationRecord*> best;
  std::map<std::string, std::string> gold;
  for (const auto& r : records) {
    if (!gold.contains(r.query)) {
      order.push_back(r.query);
      gold[r.query] = r.gold;
    }
    if (!r.success) continue;
    auto it = best.find(r.query);
    if (it == best.end() || minimality_key(r.graph) < minimality_key(it->second->graph))
      best[r.query] = &r;
  }
  CurationResult out;
  for (const auto& q : order) {
    auto it = best.find(q);
    if (it == best.end()) {
      out.excluded.push_back(q);
      continue;
    }
    out.dataset.push_back({q, gold[q], it->second->graph, true, it->second->tokens});
  }
  return out;
}

}  // namespace goa
