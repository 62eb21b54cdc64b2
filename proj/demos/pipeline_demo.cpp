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

// End-to-end walk through the pipeline on the scripted oracle backend:
// explore and curate, train the generator, generate topologies for the
// training queries, execute them and simulate an attack.

#include <algorithm>
#include <iomanip>
#include <iostream>

#include "goa/goa.hpp"

int main(int argc, char** argv) {
  using namespace goa;
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 7;

  const auto pool = pools::math_pool();
  const std::vector<std::pair<std::string, std::vector<std::string>>> specs = {
      {"What is 48 divided by 6?", {pools::kSolver}},
      {"Is 221 a prime number?", {pools::kAnalyst, pools::kInspector}},
      {"Write a loop that sums the squares below 50", {pools::kProgrammer}},
      {"Verify that 3^4 equals 81", {pools::kSolver, pools::kInspector}},
      {"How many diagonals does a hexagon have?", {pools::kAnalyst, pools::kSolver}},
      {"Compute 10 choose 3 with a program and check it", {pools::kProgrammer, pools::kInspector}},
  };
  const std::vector<std::string> gold = {"8", "no", "1015", "yes", "9", "120"};
  std::vector<QueryItem> items;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    QueryItem q;
    q.query = specs[i].first;
    q.gold = gold[i];
    q.requires_roles = specs[i].second;
    items.push_back(q);
  }
  auto oracle = scripted::OracleBackend::from_items(items);

  ExplorationConfig ec;
  ec.samples_per_query = 16;
  ec.seed = seed;
  const auto explored = explore_and_label(items, pool, harness_executor(pool, oracle), ec);
  const auto curated = curate_minimal(explored);
  std::cout << "curated " << curated.dataset.size() << " of " << items.size() << " queries\n";
  for (const auto& t : curated.dataset)
    std::cout << "  " << std::left << std::setw(50) << t.query << records::encode_graph(t.graph) << "\n";

  ModelConfig mc;
  mc.d = 64;
  mc.h = 32;
  mc.K = pool.size();
  mc.seed = seed;
  const auto provider = EmbeddingProvider::hash(mc.d);
  const auto rows = group_rows(provider, pool);
  TrainConfig tc;
  tc.epochs = 150;
  tc.warmup = 15;
  tc.batch = 8;
  tc.optimizer.lr = 1e-2;
  tc.beta_e_target = 0.01;
  tc.seed = seed;
  const auto trained = train(ModelParams::random(mc, seed), mc, rows, make_examples(provider, curated.dataset), tc);
  std::cout << "final training loss " << trained.log.back().mean.total << "\n";

  const auto X = assemble_candidate_matrix(rows, trained.params);
  GeneratorFn generator = [&](const QueryItem& q) {
    const auto at = std::find(items.begin(), items.end(), q) - items.begin();
    CounterRng rng = CounterRng(seed).fork(static_cast<std::uint64_t>(at));
    return generate_graph(trained.params, mc, encode_task(trained.params, provider, q.query).z_q, X, rng).graph;
  };

  EvalOptions opt;
  opt.rounds = 2;
  const auto clean = evaluate(items, generator, pool, oracle, opt);
  opt.attack = AttackSpec{0, std::string(scripted::kDefaultTrigger)};
  const auto attacked = evaluate(items, generator, pool, oracle, opt);
  std::cout << "clean accuracy " << clean.accuracy << ", mean tokens " << clean.mean_total_tokens << "\n"
            << "attacked accuracy " << attacked.accuracy << "\n";
  return 0;
}
