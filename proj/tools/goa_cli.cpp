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

// goa_cli: pool discovery, exploration and curation, training, generation,
// execution, attack simulation and bottleneck-weight sweeps.
//
// Exit codes: 0 success, 1 usage error, 2 validation error, 3 backend error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "goa/goa.hpp"
#include "goa/http.hpp"
#include "json.hpp"

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

struct Common {
  std::uint64_t seed = 0;
  std::string pool;
  std::string out;
  std::string backend = "scripted";
  std::string model = "gpt-4o-mini";
};

struct ModelFlags {
  std::size_t d = 384;
  std::size_t h = 256;
  std::size_t max_steps = 8;
  std::string embedding = "hash";
};

struct TrainFlags {
  std::size_t epochs = 100;
  std::size_t warmup = 10;
  std::size_t batch = 40;
  double beta_g = 0.0;
  double beta_e = 0.3;
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double clip = 1.0;
};

struct ExecFlags {
  std::size_t rounds = 3;
  std::string mode = "composite";
  std::size_t threads = 1;
};

// ---------------------------------------------------------------------------
// helpers

goa::GroupPool load_pool(const std::string& path) {
  if (path.empty()) return goa::pools::math_pool();
  auto pool = goa::records::read_pool(path);
  const auto report = goa::validate_pool(pool);
  if (!report.ok()) throw goa::ValidationError(path + ": " + report.joined());
  return pool;
}

goa::ExecutionMode parse_mode(const std::string& m) {
  return m == "expanded" ? goa::ExecutionMode::Expanded : goa::ExecutionMode::Composite;
}

std::unique_ptr<goa::http::HttpBackend> http_backend(const Common& c) {
  auto cfg = goa::http::ChatConfig::from_env();
  cfg.model = c.model;
  return std::make_unique<goa::http::HttpBackend>(cfg);
}

goa::EmbeddingProvider make_provider(const std::string& kind, std::size_t dim) {
  if (kind == "encoder")
    return goa::EmbeddingProvider::encoder(
        dim, std::make_shared<goa::http::HttpEncoder>(goa::http::HttpEncoder::config_from_env()));
  return goa::EmbeddingProvider::hash(dim);
}

void write_json(const std::string& path, const json& j) {
  goa::records::write_file_atomic(path, j.dump(2) + "\n");
}

json graph_json(const goa::GroupGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back(std::to_string(e.from) + "->" + std::to_string(e.to));
  return json{{"selected", g.selected}, {"edges", edges}};
}

json tokens_json(const goa::TokenCount& t) {
  return json{{"prompt", t.prompt}, {"response", t.response}, {"total", t.total()}};
}

json stats_json(const goa::TokenStats& s) {
  json per_agent = json::array(), per_round = json::array();
  for (const auto& a : s.per_agent) per_agent.push_back(tokens_json(a));
  for (const auto& r : s.per_round) per_round.push_back(tokens_json(r));
  auto j = tokens_json(s.totals);
  j["per_agent"] = per_agent;
  j["per_round"] = per_round;
  return j;
}

json transcript_json(const goa::RunTranscript& tr) {
  json calls = json::array();
  for (const auto& r : tr.records)
    calls.push_back({{"round", r.round},
                     {"agent", r.agent},
                     {"role", r.role},
                     {"prompt", r.prompt},
                     {"response", r.response},
                     {"prompt_tokens", r.prompt_tokens},
                     {"response_tokens", r.response_tokens},
                     {"reported_usage", r.reported_usage}});
  json j{{"final_answer", tr.final_answer}};
  j["success"] = tr.success ? json(*tr.success) : json(nullptr);
  if (tr.failure)
    j["failure"] = {{"round", tr.failure->round},
                    {"agent", tr.failure->agent},
                    {"role", tr.failure->role},
                    {"message", tr.failure->message}};
  j["calls"] = calls;
  j["tokens"] = stats_json(tr.stats);
  return j;
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string to_dot(const goa::GroupGraph& g, const goa::GroupPool& pool) {
  std::ostringstream os;
  os << "digraph goa {\n  rankdir=LR;\n  node [shape=box];\n";
  for (std::size_t t = 0; t < g.steps(); ++t) {
    const auto& grp = pool.groups.at(g.selected[t]);
    os << "  s" << t << " [label=\"" << t << ": " << dot_escape(grp.name) << "\\n"
       << goa::to_string(grp.intra_topology) << "\"];\n";
  }
  for (const auto& e : g.edges) os << "  s" << e.from << " -> s" << e.to << ";\n";
  os << "}\n";
  return os.str();
}

goa::GroupGraph read_graph_file(const std::string& path) {
  const auto lines = goa::records::read_lines(path);
  if (lines.empty()) throw goa::ValidationError(path + ": no graph record");
  return goa::records::decode_graph(lines.front().second, lines.front().first);
}

/// Loaded model plus the fixed candidate matrix for a pool.
struct Generator {
  goa::Checkpoint ck;
  goa::EmbeddingProvider provider;
  goa::CandidateMatrix X;
  std::uint64_t seed = 0;

  Generator(goa::Checkpoint c, const goa::GroupPool& pool, std::uint64_t s)
      : ck(std::move(c)), provider(make_provider(ck.embedding_kind, ck.config.d)), seed(s) {
    if (pool.size() != ck.config.K)
      throw goa::ConfigError("checkpoint was trained for " + std::to_string(ck.config.K) +
                             " groups, pool has " + std::to_string(pool.size()));
    X = goa::build_candidate_matrix(ck.params, provider, pool);
  }

  goa::Generation generate(const std::string& query, std::uint64_t stream,
                           goa::GenerateOptions opt = {}) const {
    const auto z = goa::encode_task(ck.params, provider, query).z_q;
    goa::CounterRng rng = goa::CounterRng(seed).fork(stream);
    return goa::generate_graph(ck.params, ck.config, z, X, rng, opt);
  }
};

goa::TrainConfig train_config(const TrainFlags& f, std::uint64_t seed) {
  goa::TrainConfig tc;
  tc.epochs = f.epochs;
  tc.warmup = f.warmup;
  tc.batch = f.batch;
  tc.beta_g_target = f.beta_g;
  tc.beta_e_target = f.beta_e;
  tc.optimizer.lr = f.lr;
  tc.optimizer.weight_decay = f.weight_decay;
  tc.optimizer.clip_norm = f.clip;
  tc.seed = seed;
  return tc;
}

json epoch_json(const goa::EpochLog& e, std::uint64_t seed) {
  return json{{"v", "v1"},
              {"type", "epoch"},
              {"seed", seed},
              {"epoch", e.epoch},
              {"beta_g", e.beta_g},
              {"beta_e", e.beta_e},
              {"l_group", e.mean.l_group},
              {"l_edge", e.mean.l_edge},
              {"kl_group", e.mean.kl_group},
              {"kl_edge", e.mean.kl_edge},
              {"total", e.mean.total}};
}

void check_dataset(const std::vector<goa::Trajectory>& data, const goa::GroupPool& pool,
                   const std::string& path) {
  if (data.empty()) throw goa::ValidationError(path + ": dataset is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = goa::validate_group_graph(data[i].graph, pool);
    if (!r.ok()) throw goa::ValidationError(path + ": record " + std::to_string(i + 1) + ": " + r.joined());
    if (data[i].graph.steps() == 0)
      throw goa::ValidationError(path + ": record " + std::to_string(i + 1) + ": empty graph");
  }
}

void summary(const json& j) { std::cout << j.dump() << std::endl; }

// ---------------------------------------------------------------------------
// discover

struct DiscoverFlags {
  std::string tmpl;
  std::string instruction;
  std::string proposals;
  std::size_t groups = 16;
};

int cmd_discover(const Common& c, const DiscoverFlags& f) {
  goa::GroupPool pool;
  std::vector<goa::pools::ProposalReject> rejects;
  std::string source;
  if (!f.instruction.empty()) {
    std::string reply;
    if (c.backend == "http") {
      auto b = http_backend(c);
      goa::AgentRequest req;
      req.role = "Group Designer";
      req.system_prompt = "You design teams of expert agents.";
      req.user_prompt = goa::pools::discovery_prompt(f.instruction, f.groups);
      req.prompt = req.system_prompt + "\n\n" + req.user_prompt;
      reply = b->call(req).text;
    } else {
      if (f.proposals.empty())
        throw goa::ConfigError("discover with --instruction on the scripted backend needs --proposals");
      std::ifstream in(f.proposals);
      reply.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    auto result = goa::pools::parse_proposed_groups(reply);
    pool = std::move(result.pool);
    rejects = std::move(result.rejects);
    for (const auto& r : rejects) std::cerr << "rejected line " << r.line << ": " << r.reason << "\n";
    if (pool.groups.empty()) throw goa::ValidationError("no valid group proposals");
    source = "llm";
  } else if (!f.tmpl.empty()) {
    pool = load_pool(f.tmpl);
    source = "template";
  } else {
    pool = goa::pools::math_pool();
    source = "bundled";
  }
  const auto report = goa::validate_pool(pool);
  if (!report.ok()) throw goa::ValidationError(report.joined());
  goa::records::write_pool(c.out, pool);
  json rj = json::array();
  for (const auto& r : rejects) rj.push_back({{"line", r.line}, {"reason", r.reason}});
  summary({{"command", "discover"}, {"seed", c.seed}, {"source", source}, {"groups", pool.size()},
           {"rejected", rj}, {"out", c.out}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// curate

struct CurateFlags {
  std::string queries;
  std::string report;
  std::size_t samples = 8;
  std::size_t min_groups = 1;
  std::size_t max_groups = 3;
  std::size_t max_steps = 8;
  std::size_t resample = 0;
};

int cmd_curate(const Common& c, const CurateFlags& f, const ExecFlags& x) {
  const auto pool = load_pool(c.pool);
  const auto queries = goa::records::read_queries(f.queries);
  if (queries.empty()) throw goa::ValidationError(f.queries + ": no queries");

  std::unique_ptr<goa::AgentBackend> backend;
  if (c.backend == "http")
    backend = http_backend(c);
  else
    backend = std::make_unique<goa::scripted::OracleBackend>(goa::scripted::OracleBackend::from_items(queries));
  const auto exec = goa::harness_executor(pool, *backend, x.rounds, parse_mode(x.mode));

  goa::ExplorationConfig cfg;
  cfg.samples_per_query = f.samples;
  cfg.min_groups = f.min_groups;
  cfg.max_groups = f.max_groups;
  cfg.max_steps = f.max_steps;
  cfg.threads = backend->thread_safe() ? x.threads : 1;
  cfg.seed = c.seed;

  auto records = goa::explore_and_label(queries, pool, exec, cfg);
  auto curated = goa::curate_minimal(records);
  std::size_t errors = 0;
  for (const auto& r : records) errors += r.error.has_value();
  std::vector<std::uint64_t> attempt_seeds{cfg.seed};

  // re-explore dropped queries with fresh seeds
  for (std::size_t attempt = 1; attempt <= f.resample && !curated.excluded.empty(); ++attempt) {
    std::vector<goa::QueryItem> retry;
    for (const auto& q : queries)
      if (std::find(curated.excluded.begin(), curated.excluded.end(), q.query) != curated.excluded.end())
        retry.push_back(q);
    cfg.seed = goa::CounterRng(c.seed).fork(attempt).seed();
    attempt_seeds.push_back(cfg.seed);
    const auto more = goa::explore_and_label(retry, pool, exec, cfg);
    for (const auto& r : more) errors += r.error.has_value();
    auto extra = goa::curate_minimal(more);
    curated.dataset.insert(curated.dataset.end(), extra.dataset.begin(), extra.dataset.end());
    curated.excluded = std::move(extra.excluded);
  }
  // keep the input query order
  std::vector<goa::Trajectory> ordered;
  for (const auto& q : queries)
    for (const auto& t : curated.dataset)
      if (t.query == q.query) {
        ordered.push_back(t);
        break;
      }

  goa::records::write_dataset(c.out, ordered);
  const std::string report_path = f.report.empty() ? c.out + ".report.json" : f.report;
  json rep{{"seed", c.seed},
           {"attempt_seeds", attempt_seeds},
           {"queries", queries.size()},
           {"kept", ordered.size()},
           {"excluded", curated.excluded},
           {"execution_errors", errors},
           {"samples_per_query", f.samples}};
  write_json(report_path, rep);
  summary({{"command", "curate"}, {"seed", c.seed}, {"kept", ordered.size()},
           {"excluded", curated.excluded.size()}, {"out", c.out}, {"report", report_path}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOnlyFlags {
  std::string dataset;
  std::string resume;
  std::string log;
};

int cmd_train(const Common& c, const TrainOnlyFlags& f, const ModelFlags& m, const TrainFlags& t) {
  const auto pool = load_pool(c.pool);
  const auto data = goa::records::read_dataset(f.dataset);
  check_dataset(data, pool, f.dataset);

  goa::Checkpoint ck;
  std::optional<goa::OptimizerState<goa::Real>> resume;
  auto tc = train_config(t, c.seed);
  if (!f.resume.empty()) {
    ck = goa::load_checkpoint(f.resume);
    if (ck.config.K != pool.size())
      throw goa::ConfigError("checkpoint was trained for " + std::to_string(ck.config.K) +
                             " groups, pool has " + std::to_string(pool.size()));
    if (ck.config.seed != c.seed)
      throw goa::ConfigError("resume needs the original --seed " + std::to_string(ck.config.seed));
    resume = ck.optimizer;
    tc.start_epoch = ck.epochs_completed;
  } else {
    ck.config.d = m.d;
    ck.config.h = m.h;
    ck.config.K = pool.size();
    ck.config.max_steps = m.max_steps;
    ck.config.seed = c.seed;
    ck.config.validate();
    ck.embedding_kind = m.embedding;
    ck.params = goa::ModelParams::random(ck.config, c.seed);
  }
  ck.config.beta_g = t.beta_g;
  ck.config.beta_e = t.beta_e;
  tc.validate();

  for (const auto& tr : data)
    if (tr.graph.steps() > ck.config.max_steps)
      throw goa::ValidationError("dataset graph has " + std::to_string(tr.graph.steps()) +
                                 " steps, above --max-steps " + std::to_string(ck.config.max_steps));

  const auto provider = make_provider(ck.embedding_kind, ck.config.d);
  const auto rows = goa::group_rows(provider, pool);
  const auto examples = goa::make_examples(provider, data);
  std::string log;
  auto result = goa::train(std::move(ck.params), ck.config, rows, examples, tc, resume,
                           [&](const goa::EpochLog& e) { log += epoch_json(e, c.seed).dump() + "\n"; });
  ck.params = std::move(result.params);
  ck.optimizer = std::move(result.optimizer);
  ck.epochs_completed = tc.epochs;
  goa::save_checkpoint(c.out, ck);
  const std::string log_path = f.log.empty() ? c.out + ".log.jsonl" : f.log;
  goa::records::write_file_atomic(log_path, log);
  json last = result.log.empty() ? json(nullptr) : json(result.log.back().mean.total);
  summary({{"command", "train"}, {"seed", c.seed}, {"epochs", tc.epochs},
           {"start_epoch", tc.start_epoch}, {"final_loss", last}, {"out", c.out}, {"log", log_path}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateFlags {
  std::string checkpoint;
  std::vector<std::string> query;
  std::string queries;
  std::string dot;
  double temperature = 0.0;
};

int cmd_generate(const Common& c, const GenerateFlags& f) {
  const auto pool = load_pool(c.pool);
  std::vector<std::string> texts = f.query;
  if (!f.queries.empty())
    for (const auto& q : goa::records::read_queries(f.queries)) texts.push_back(q.query);
  if (texts.empty()) throw goa::ConfigError("generate needs --query or --queries");
  const Generator gen(goa::load_checkpoint(f.checkpoint), pool, c.seed);
  goa::GenerateOptions opt;
  opt.temperature = f.temperature;

  std::string out;
  std::string dot;
  json graphs = json::array();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto g = gen.generate(texts[i], i, opt);
    out += goa::records::encode_graph(g.graph) + "\n";
    if (i == 0) dot = to_dot(g.graph, pool);
    graphs.push_back({{"query", texts[i]}, {"graph", graph_json(g.graph)}, {"truncated", g.truncated}});
  }
  goa::records::write_file_atomic(c.out, out);
  if (!f.dot.empty()) goa::records::write_file_atomic(f.dot, dot);
  summary({{"command", "generate"}, {"seed", c.seed}, {"graphs", graphs}, {"out", c.out}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// run

struct RunFlags {
  std::string graph;
  std::string checkpoint;
  std::string query;
  std::string gold;
  std::string queries;
  std::string responder = "digest";
  std::optional<std::size_t> attack_target;
  std::string attack_text = std::string(goa::scripted::kDefaultTrigger);
};

int cmd_run(const Common& c, const RunFlags& f, const ExecFlags& x) {
  const auto pool = load_pool(c.pool);
  if (f.query.empty()) throw goa::ConfigError("run needs --query");
  goa::GroupGraph graph;
  if (!f.graph.empty())
    graph = read_graph_file(f.graph);
  else if (!f.checkpoint.empty())
    graph = Generator(goa::load_checkpoint(f.checkpoint), pool, c.seed).generate(f.query, 0).graph;
  else
    throw goa::ConfigError("run needs --graph or --checkpoint");
  const auto agents = goa::materialize_agent_graph(graph, pool, parse_mode(x.mode));

  goa::QueryItem item;
  item.query = f.query;
  item.gold = f.gold;
  std::unique_ptr<goa::AgentBackend> owned;
  std::shared_ptr<goa::AgentBackend> shared;
  goa::AgentBackend* backend = nullptr;
  if (c.backend == "http") {
    owned = http_backend(c);
    backend = owned.get();
  } else if (f.responder == "oracle") {
    if (f.queries.empty()) throw goa::ConfigError("--responder oracle needs --queries");
    const auto items = goa::records::read_queries(f.queries);
    for (const auto& q : items)
      if (q.query == f.query) item = q;
    owned = std::make_unique<goa::scripted::OracleBackend>(goa::scripted::OracleBackend::from_items(items));
    backend = owned.get();
  } else {
    shared = f.responder == "echo" ? goa::scripted::make_echo_backend() : goa::scripted::make_digest_backend();
    backend = shared.get();
  }

  goa::RunOptions opt;
  opt.rounds = x.rounds;
  opt.threads = x.threads;
  if (f.attack_target) opt.attack = goa::AttackSpec{*f.attack_target, f.attack_text};
  const auto tr = f.gold.empty() && f.queries.empty()
                      ? goa::run_graph(agents, *backend, item.query, opt)
                      : goa::run_item(agents, *backend, item, opt);
  json j{{"seed", c.seed},          {"query", item.query}, {"graph", graph_json(graph)},
         {"mode", x.mode},          {"rounds", x.rounds},  {"backend", c.backend}};
  j.update(transcript_json(tr));
  write_json(c.out, j);
  summary({{"command", "run"}, {"seed", c.seed}, {"calls", tr.records.size()},
           {"tokens", tr.stats.total()}, {"aborted", tr.aborted()}, {"out", c.out}});
  if (tr.aborted()) {
    std::cerr << "error: " << goa::summarize_failure(*tr.failure) << "\n";
    return kExitBackend;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// attack

struct AttackFlags {
  std::string queries;
  std::string graph;
  std::string checkpoint;
  std::size_t target = 0;
  std::string text = std::string(goa::scripted::kDefaultTrigger);
};

json eval_json(const goa::EvalReport& r) {
  return json{{"accuracy", r.accuracy},
              {"correct", r.correct},
              {"items", r.items},
              {"failed", r.failed},
              {"mean_prompt_tokens", r.mean_prompt_tokens},
              {"mean_response_tokens", r.mean_response_tokens},
              {"mean_total_tokens", r.mean_total_tokens}};
}

int cmd_attack(const Common& c, const AttackFlags& f, const ExecFlags& x) {
  const auto pool = load_pool(c.pool);
  const auto items = goa::records::read_queries(f.queries);
  if (items.empty()) throw goa::ValidationError(f.queries + ": no queries");

  goa::GeneratorFn generator;
  std::shared_ptr<Generator> model;
  if (!f.graph.empty()) {
    const auto fixed = read_graph_file(f.graph);
    generator = [fixed](const goa::QueryItem&) { return fixed; };
  } else if (!f.checkpoint.empty()) {
    model = std::make_shared<Generator>(goa::load_checkpoint(f.checkpoint), pool, c.seed);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < items.size(); ++i) index.emplace(items[i].query, i);
    generator = [model, index](const goa::QueryItem& q) { return model->generate(q.query, index.at(q.query)).graph; };
  } else {
    throw goa::ConfigError("attack needs --graph or --checkpoint");
  }

  std::unique_ptr<goa::AgentBackend> backend;
  if (c.backend == "http")
    backend = http_backend(c);
  else
    backend = std::make_unique<goa::scripted::OracleBackend>(goa::scripted::OracleBackend::from_items(items));

  goa::EvalOptions opt;
  opt.rounds = x.rounds;
  opt.mode = parse_mode(x.mode);
  opt.threads = x.threads;
  const auto clean = goa::evaluate(items, generator, pool, *backend, opt);
  opt.attack = goa::AttackSpec{f.target, f.text};
  const auto attacked = goa::evaluate(items, generator, pool, *backend, opt);

  json per_item = json::array();
  std::size_t backend_failures = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& a = clean.records[i];
    const auto& b = attacked.records[i];
    json row{{"query", items[i].query},
             {"clean_answer", a.answer},
             {"clean_success", a.success},
             {"attacked_answer", b.answer},
             {"attacked_success", b.success}};
    if (a.error) row["clean_error"] = *a.error;
    if (b.error) row["attacked_error"] = *b.error;
    for (const auto* e : {&a.error, &b.error})
      if (*e && e->value().find("call failed") == 0) ++backend_failures;
    per_item.push_back(row);
  }
  json rep{{"seed", c.seed},         {"target", f.target},       {"attack_text", f.text},
           {"mode", x.mode},         {"rounds", x.rounds},       {"clean", eval_json(clean)},
           {"attacked", eval_json(attacked)}, {"accuracy_drop", clean.accuracy - attacked.accuracy},
           {"items", per_item}};
  write_json(c.out, rep);
  summary({{"command", "attack"}, {"seed", c.seed}, {"clean_accuracy", clean.accuracy},
           {"attacked_accuracy", attacked.accuracy}, {"out", c.out}});
  if (backend_failures > 0) {
    std::cerr << "error: " << backend_failures << " runs failed at the backend\n";
    return kExitBackend;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepFlags {
  std::string dataset;
  std::vector<double> beta_g{0.0, 0.3};
  std::vector<double> beta_e{0.0, 0.3};
};

int cmd_sweep(const Common& c, const SweepFlags& f, const ModelFlags& m, TrainFlags t, const ExecFlags& x) {
  const auto pool = load_pool(c.pool);
  const auto data = goa::records::read_dataset(f.dataset);
  check_dataset(data, pool, f.dataset);

  goa::ModelConfig mc;
  mc.d = m.d;
  mc.h = m.h;
  mc.K = pool.size();
  mc.max_steps = m.max_steps;
  mc.seed = c.seed;
  mc.validate();
  const auto provider = make_provider(m.embedding, mc.d);
  const auto rows = goa::group_rows(provider, pool);
  const auto examples = goa::make_examples(provider, data);
  const auto init = goa::ModelParams::random(mc, c.seed);
  auto digest = goa::scripted::make_digest_backend();

  json cells = json::array();
  for (double bg : f.beta_g)
    for (double be : f.beta_e) {
      t.beta_g = bg;
      t.beta_e = be;
      auto tc = train_config(t, c.seed);
      const auto result = goa::train(init, mc, rows, examples, tc);
      const auto X = goa::assemble_candidate_matrix(rows, result.params);
      std::size_t exact = 0;
      std::uint64_t tokens = 0;
      std::size_t executed = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto z = goa::task_encoder_forward(result.params, examples[i].query_embedding);
        goa::CounterRng rng = goa::CounterRng(c.seed).fork(i);
        const auto g = goa::generate_graph(result.params, mc, z, X, rng).graph;
        exact += g == data[i].graph;
        if (g.steps() == 0) continue;
        goa::RunOptions ro;
        ro.rounds = x.rounds;
        tokens += goa::run_graph(goa::materialize_agent_graph(g, pool, parse_mode(x.mode)), *digest,
                                 data[i].query, ro)
                      .stats.total();
        ++executed;
      }
      const double n = static_cast<double>(data.size());
      cells.push_back({{"beta_g", bg},
                       {"beta_e", be},
                       {"reconstruction_rate", static_cast<double>(exact) / n},
                       {"mean_tokens", executed ? static_cast<double>(tokens) / static_cast<double>(executed) : 0.0},
                       {"final_loss", result.log.empty() ? 0.0 : result.log.back().mean.total}});
    }
  json rep{{"seed", c.seed}, {"epochs", t.epochs}, {"rounds", x.rounds}, {"mode", x.mode},
           {"cells", cells}};
  write_json(c.out, rep);
  summary({{"command", "sweep"}, {"seed", c.seed}, {"cells", cells.size()}, {"out", c.out}});
  return kExitOk;
}

// ---------------------------------------------------------------------------

void add_common(CLI::App* s, Common& c, bool needs_out = true) {
  s->add_option("--seed", c.seed, "Seed for every random choice");
  s->add_option("--pool", c.pool, "Group pool file (default: bundled math pool)")->check(CLI::ExistingFile);
  auto* out = s->add_option("--out", c.out, "Output path");
  if (needs_out) out->required();
  s->add_option("--backend", c.backend, "Agent backend")->check(CLI::IsMember({"scripted", "http"}));
  s->add_option("--model", c.model, "Chat model name for the http backend");
}

void add_model(CLI::App* s, ModelFlags& m) {
  s->add_option("--dim", m.d, "Embedding dimension");
  s->add_option("--hidden", m.h, "Hidden width");
  s->add_option("--max-steps", m.max_steps, "Generation step cap");
  s->add_option("--embedding", m.embedding, "Query embedding")->check(CLI::IsMember({"hash", "encoder"}));
}

void add_train(CLI::App* s, TrainFlags& t) {
  s->add_option("--epochs", t.epochs, "Final epoch count");
  s->add_option("--warmup", t.warmup, "KL warm-up epochs");
  s->add_option("--batch", t.batch, "Minibatch size");
  s->add_option("--lr", t.lr, "AdamW learning rate");
  s->add_option("--weight-decay", t.weight_decay, "AdamW decoupled weight decay");
  s->add_option("--clip", t.clip, "Gradient norm clip (<= 0 disables)");
}

void add_exec(CLI::App* s, ExecFlags& x) {
  s->add_option("--rounds", x.rounds, "Communication rounds")->check(CLI::PositiveNumber);
  s->add_option("--mode", x.mode, "Execution mode")->check(CLI::IsMember({"composite", "expanded"}));
  s->add_option("--threads", x.threads, "Concurrent backend calls")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-level topology generation for multi-agent teams"};
  app.require_subcommand(1);

  Common common;
  ModelFlags model;
  TrainFlags trainf;
  ExecFlags exec;

  DiscoverFlags df;
  auto* discover = app.add_subcommand("discover", "Write a validated group pool");
  add_common(discover, common);
  discover->add_option("--template", df.tmpl, "Pool file to validate and copy")->check(CLI::ExistingFile);
  discover->add_option("--instruction", df.instruction, "Domain instruction for LLM proposals");
  discover->add_option("--proposals", df.proposals, "Canned proposal text for the scripted backend")
      ->check(CLI::ExistingFile);
  discover->add_option("--groups", df.groups, "Number of groups to request");

  CurateFlags cf;
  ExecFlags curate_exec;
  curate_exec.rounds = 1;
  auto* curate = app.add_subcommand("curate", "Explore template topologies and keep minimal successes");
  add_common(curate, common);
  add_exec(curate, curate_exec);
  curate->add_option("--queries", cf.queries, "Query records")->required()->check(CLI::ExistingFile);
  curate->add_option("--report", cf.report, "Exclusion report path (default: <out>.report.json)");
  curate->add_option("--samples", cf.samples, "Topologies sampled per query");
  curate->add_option("--min-groups", cf.min_groups, "Fewest groups per sampled topology");
  curate->add_option("--max-groups", cf.max_groups, "Most groups per sampled topology");
  curate->add_option("--max-steps", cf.max_steps, "Step cap");
  curate->add_option("--resample", cf.resample, "Extra exploration attempts for dropped queries");

  TrainOnlyFlags tf;
  auto* train = app.add_subcommand("train", "Train the generator on a curated dataset");
  add_common(train, common);
  add_model(train, model);
  add_train(train, trainf);
  train->add_option("--dataset", tf.dataset, "Trajectory records")->required()->check(CLI::ExistingFile);
  train->add_option("--checkpoint", tf.resume, "Resume from this checkpoint")->check(CLI::ExistingFile);
  train->add_option("--log", tf.log, "Epoch log path (default: <out>.log.jsonl)");
  train->add_option("--beta-g", trainf.beta_g, "Group bottleneck weight");
  train->add_option("--beta-e", trainf.beta_e, "Edge bottleneck weight");

  GenerateFlags gf;
  auto* generate = app.add_subcommand("generate", "Generate group graphs for queries");
  add_common(generate, common);
  generate->add_option("--checkpoint", gf.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  generate->add_option("--query", gf.query, "Query text (repeatable)");
  generate->add_option("--queries", gf.queries, "Query records")->check(CLI::ExistingFile);
  generate->add_option("--dot", gf.dot, "Graphviz export of the first graph");
  generate->add_option("--temperature", gf.temperature, "0 picks the argmax group");

  RunFlags rf;
  auto* run = app.add_subcommand("run", "Execute a group graph and record the transcript");
  add_common(run, common);
  add_exec(run, exec);
  run->add_option("--graph", rf.graph, "Graph record file")->check(CLI::ExistingFile);
  run->add_option("--checkpoint", rf.checkpoint, "Generate the graph with this checkpoint")->check(CLI::ExistingFile);
  run->add_option("--query", rf.query, "Task query")->required();
  run->add_option("--gold", rf.gold, "Gold answer for scoring");
  run->add_option("--queries", rf.queries, "Query records for the oracle responder")->check(CLI::ExistingFile);
  run->add_option("--responder", rf.responder, "Scripted responder")
      ->check(CLI::IsMember({"digest", "echo", "oracle"}));
  run->add_option("--attack-target", rf.attack_target, "Agent whose system prompt is attacked");
  run->add_option("--attack-text", rf.attack_text, "Injected text");

  AttackFlags af;
  ExecFlags attack_exec;
  auto* attack = app.add_subcommand("attack", "Paired clean and attacked evaluation");
  add_common(attack, common);
  add_exec(attack, attack_exec);
  attack->add_option("--queries", af.queries, "Query records")->required()->check(CLI::ExistingFile);
  attack->add_option("--graph", af.graph, "Fixed graph for every query")->check(CLI::ExistingFile);
  attack->add_option("--checkpoint", af.checkpoint, "Generate graphs with this checkpoint")->check(CLI::ExistingFile);
  attack->add_option("--target", af.target, "Attacked agent index");
  attack->add_option("--text", af.text, "Injected text");

  SweepFlags sf;
  ExecFlags sweep_exec;
  sweep_exec.rounds = 1;
  auto* sweep = app.add_subcommand("sweep", "Grid over bottleneck weights");
  add_common(sweep, common);
  add_model(sweep, model);
  add_train(sweep, trainf);
  add_exec(sweep, sweep_exec);
  sweep->add_option("--dataset", sf.dataset, "Trajectory records")->required()->check(CLI::ExistingFile);
  sweep->add_option("--beta-g", sf.beta_g, "Group bottleneck weights")->delimiter(',');
  sweep->add_option("--beta-e", sf.beta_e, "Edge bottleneck weights")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*discover) return cmd_discover(common, df);
    if (*curate) return cmd_curate(common, cf, curate_exec);
    if (*train) return cmd_train(common, tf, model, trainf);
    if (*generate) return cmd_generate(common, gf);
    if (*run) return cmd_run(common, rf, exec);
    if (*attack) return cmd_attack(common, af, attack_exec);
    if (*sweep) return cmd_sweep(common, sf, model, trainf, sweep_exec);
  } catch (const goa::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const goa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
