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

// Execution of materialized agent graphs: scheduling, prompt layout, rounds,
// token accounting and system-prompt attacks.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "goa/error.hpp"
#include "goa/exploration.hpp"
#include "goa/graph.hpp"
#include "goa/task.hpp"

namespace goa {

// ---------------------------------------------------------------------------
// Tokens

/// Offline estimator: mean of the whitespace-unit count and ceil(non-space / 4),
/// rounded up.
inline std::uint64_t count_tokens(std::string_view text) {
  std::uint64_t words = 0, nonspace = 0;
  bool in_word = false;
  for (char c : text) {
    const bool sp = std::isspace(static_cast<unsigned char>(c));
    if (!sp) {
      ++nonspace;
      if (!in_word) ++words;
    }
    in_word = !sp;
  }
  const std::uint64_t chars = (nonspace + 3) / 4;
  return (words + chars + 1) / 2;
}

using TokenCounter = std::function<std::uint64_t(std::string_view)>;

struct TokenCount {
  std::uint64_t prompt = 0;
  std::uint64_t response = 0;
  std::uint64_t total() const noexcept { return prompt + response; }
  TokenCount& operator+=(const TokenCount& o) {
    prompt += o.prompt;
    response += o.response;
    return *this;
  }
  friend bool operator==(const TokenCount&, const TokenCount&) = default;
};

struct TokenStats {
  TokenCount totals;
  std::vector<TokenCount> per_agent;
  std::vector<TokenCount> per_round;

  std::uint64_t prompt_tokens() const noexcept { return totals.prompt; }
  std::uint64_t response_tokens() const noexcept { return totals.response; }
  std::uint64_t total() const noexcept { return totals.total(); }

  friend bool operator==(const TokenStats&, const TokenStats&) = default;
};

// ---------------------------------------------------------------------------
// Backends

enum class BackendKind { Scripted, Http };

struct AgentRequest {
  std::size_t agent = 0;
  std::size_t round = 1;
  std::string role;
  std::string system_prompt;  // after attack injection
  std::string user_prompt;    // task, upstream and previous-response sections
  std::string prompt;         // full composed prompt
};

struct ReportedUsage {
  std::uint64_t prompt = 0;
  std::uint64_t completion = 0;
};

struct AgentReply {
  std::string text;
  std::optional<ReportedUsage> usage;
};

class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual BackendKind kind() const = 0;
  virtual AgentReply call(const AgentRequest& request) = 0;
  /// Whether `call` may be invoked from several threads at once.
  virtual bool thread_safe() const { return false; }
};

/// Deterministic backend driven by a pure (role, prompt) -> text function.
class ScriptedBackend : public AgentBackend {
 public:
  using Fn = std::function<std::string(const std::string& role, const std::string& prompt)>;
  explicit ScriptedBackend(Fn fn) : fn_(std::move(fn)) {
    if (!fn_) throw ConfigError("ScriptedBackend: empty response function");
  }
  BackendKind kind() const override { return BackendKind::Scripted; }
  AgentReply call(const AgentRequest& r) override { return {fn_(r.role, r.prompt), std::nullopt}; }
  bool thread_safe() const override { return true; }

 private:
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Scheduling

/// Kahn level decomposition; each level sorted by agent index.
inline std::vector<std::vector<std::size_t>> topological_schedule(const AgentGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::vector<std::size_t>> succ(n);
  for (auto [a, b] : g.edges) {
    if (a >= n || b >= n)
      throw ValidationError("agent edge " + std::to_string(a) + "->" + std::to_string(b) +
                            " outside graph of " + std::to_string(n) + " agents");
    succ[a].push_back(b);
    ++indeg[b];
  }
  std::vector<std::vector<std::size_t>> levels;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) current.push_back(i);
  std::size_t placed = 0;
  while (!current.empty()) {
    placed += current.size();
    std::vector<std::size_t> next;
    for (std::size_t a : current)
      for (std::size_t b : succ[a])
        if (--indeg[b] == 0) next.push_back(b);
    std::sort(next.begin(), next.end());
    levels.push_back(std::move(current));
    current = std::move(next);
  }
  if (placed != n) {
    for (std::size_t i = 0; i < n; ++i)
      if (indeg[i] > 0)
        throw ValidationError("agent graph has a cycle through agent " + std::to_string(i) +
                              " (" + g.agents[i].role + ")");
  }
  return levels;
}

// ---------------------------------------------------------------------------
// Prompt layout

struct UpstreamMessage {
  std::string role;
  std::string response;
  bool operator==(const UpstreamMessage&) const = default;
};

inline constexpr std::string_view kSystemHeader = "[System]";
inline constexpr std::string_view kTaskHeader = "[Task]";
inline constexpr std::string_view kPreviousHeader = "[Your previous response]";

inline std::string upstream_header(std::string_view role) {
  return "[Upstream: " + std::string(role) + "]";
}

/// Everything after the system block.
inline std::string compose_user_prompt(std::string_view query,
                                       const std::vector<UpstreamMessage>& upstream,
                                       std::size_t round,
                                       const std::optional<std::string>& previous) {
  std::string out;
  out += kTaskHeader;
  out += '\n';
  out += query;
  for (const auto& u : upstream) {
    out += "\n\n" + upstream_header(u.role) + "\n";
    out += u.response;
  }
  if (round > 1 && previous) {
    out += "\n\n";
    out += kPreviousHeader;
    out += '\n';
    out += *previous;
  }
  return out;
}

inline std::string compose_prompt(std::string_view system_prompt, std::string_view query,
                                  const std::vector<UpstreamMessage>& upstream, std::size_t round,
                                  const std::optional<std::string>& previous) {
  std::string out;
  out += kSystemHeader;
  out += '\n';
  out += system_prompt;
  out += "\n\n";
  out += compose_user_prompt(query, upstream, round, previous);
  return out;
}

// ---------------------------------------------------------------------------
// Running

struct AttackSpec {
  std::size_t target = 0;
  std::string text;
};

inline std::string inject_attack(std::string_view attack, std::string_view system_prompt) {
  return std::string(attack) + "\n" + std::string(system_prompt);
}

struct CallRecord {
  std::size_t round = 1;
  std::size_t agent = 0;
  std::string role;
  std::string prompt;
  std::string response;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t response_tokens = 0;
  bool reported_usage = false;

  friend bool operator==(const CallRecord&, const CallRecord&) = default;
};

struct CallFailure {
  std::size_t round = 1;
  std::size_t agent = 0;
  std::string role;
  std::string message;

  friend bool operator==(const CallFailure&, const CallFailure&) = default;
};

struct RunTranscript {
  std::vector<CallRecord> records;
  std::string final_answer;
  std::optional<bool> success;
  std::optional<CallFailure> failure;
  TokenStats stats;

  bool aborted() const noexcept { return failure.has_value(); }

  friend bool operator==(const RunTranscript&, const RunTranscript&) = default;
};

struct RunOptions {
  std::size_t rounds = 3;
  std::optional<AttackSpec> attack;
  bool summarizer_full_history = false;
  std::size_t threads = 1;  // concurrent calls within one schedule level
  TokenCounter counter = count_tokens;
};

inline std::string summarize_failure(const CallFailure& f) {
  return "call failed in round " + std::to_string(f.round) + " at agent " +
         std::to_string(f.agent) + " (" + f.role + "): " + f.message;
}

/// Executes `rounds` rounds over the schedule. The summarizer runs only in the
/// final round. A backend failure stops the run and is recorded in `failure`.
inline RunTranscript run_graph(const AgentGraph& graph, AgentBackend& backend,
                               const std::string& query, const RunOptions& opt = {},
                               const std::optional<std::string>& gold = std::nullopt,
                               const QueryItem* match = nullptr) {
  if (opt.rounds < 1) throw ConfigError("run_graph: rounds must be >= 1");
  if (opt.attack && opt.attack->target >= graph.size())
    throw ConfigError("run_graph: attack target " + std::to_string(opt.attack->target) +
                      " outside graph of " + std::to_string(graph.size()) + " agents");
  const auto levels = topological_schedule(graph);
  const std::size_t n = graph.size();
  const TokenCounter counter = opt.counter ? opt.counter : TokenCounter(count_tokens);

  RunTranscript tr;
  tr.stats.per_agent.assign(n, {});
  tr.stats.per_round.assign(opt.rounds, {});
  std::vector<std::optional<std::string>> current(n), previous(n);
  std::vector<std::vector<std::size_t>> preds(n);
  for (std::size_t a = 0; a < n; ++a) preds[a] = graph.predecessors(a);

  auto system_for = [&](std::size_t a) {
    const auto& sp = graph.agents[a].system_prompt;
    if (opt.attack && opt.attack->target == a) return inject_attack(opt.attack->text, sp);
    return sp;
  };

  auto build_request = [&](std::size_t a, std::size_t round) {
    std::vector<UpstreamMessage> up;
    if (a == graph.summarizer && opt.summarizer_full_history) {
      for (const auto& rec : tr.records)
        if (rec.agent != graph.summarizer)
          up.push_back({rec.role + " (round " + std::to_string(rec.round) + ")", rec.response});
    } else {
      for (std::size_t p : preds[a])
        if (current[p]) up.push_back({graph.agents[p].role, *current[p]});
    }
    AgentRequest req;
    req.agent = a;
    req.round = round;
    req.role = graph.agents[a].role;
    req.system_prompt = system_for(a);
    req.user_prompt = compose_user_prompt(query, up, round, previous[a]);
    req.prompt = compose_prompt(req.system_prompt, query, up, round, previous[a]);
    return req;
  };

  struct Outcome {
    std::optional<AgentReply> reply;
    std::string error;
  };
  auto invoke = [&backend](const AgentRequest& req) {
    Outcome o;
    try {
      o.reply = backend.call(req);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    return o;
  };

  for (std::size_t round = 1; round <= opt.rounds; ++round) {
    const bool last = round == opt.rounds;
    for (const auto& level : levels) {
      std::vector<std::size_t> agents;
      for (std::size_t a : level)
        if (a != graph.summarizer || last) agents.push_back(a);
      std::vector<AgentRequest> reqs;
      for (std::size_t a : agents) reqs.push_back(build_request(a, round));
      std::vector<Outcome> outs(reqs.size());
      if (opt.threads > 1 && backend.thread_safe() && reqs.size() > 1) {
        for (std::size_t s = 0; s < reqs.size(); s += opt.threads) {
          std::vector<std::future<Outcome>> fs;
          const std::size_t e = std::min(reqs.size(), s + opt.threads);
          for (std::size_t k = s; k < e; ++k)
            fs.push_back(std::async(std::launch::async, invoke, std::cref(reqs[k])));
          for (std::size_t k = s; k < e; ++k) outs[k] = fs[k - s].get();
        }
      } else {
        for (std::size_t k = 0; k < reqs.size(); ++k) {
          outs[k] = invoke(reqs[k]);
          if (!outs[k].reply) break;
        }
      }
      // commit in agent-index order
      for (std::size_t k = 0; k < reqs.size(); ++k) {
        const auto& req = reqs[k];
        if (!outs[k].reply) {
          tr.failure = CallFailure{round, req.agent, req.role, outs[k].error};
          tr.final_answer.clear();
          return tr;
        }
        const auto& reply = *outs[k].reply;
        CallRecord rec{round, req.agent, req.role, req.prompt, reply.text, 0, 0, false};
        if (reply.usage) {
          rec.prompt_tokens = reply.usage->prompt;
          rec.response_tokens = reply.usage->completion;
          rec.reported_usage = true;
        } else {
          rec.prompt_tokens = counter(req.prompt);
          rec.response_tokens = counter(reply.text);
        }
        const TokenCount c{rec.prompt_tokens, rec.response_tokens};
        tr.stats.totals += c;
        tr.stats.per_agent[req.agent] += c;
        tr.stats.per_round[round - 1] += c;
        current[req.agent] = reply.text;
        tr.records.push_back(std::move(rec));
      }
    }
    previous = current;
  }
  tr.final_answer = current[graph.summarizer].value_or("");
  if (match)
    tr.success = answer_matches(*match, tr.final_answer);
  else if (gold)
    tr.success = trim(tr.final_answer) == trim(*gold);
  return tr;
}

inline RunTranscript run_item(const AgentGraph& graph, AgentBackend& backend,
                              const QueryItem& item, const RunOptions& opt = {}) {
  return run_graph(graph, backend, item.query, opt, item.gold, &item);
}

// ---------------------------------------------------------------------------
// Evaluation

using GeneratorFn = std::function<GroupGraph(const QueryItem&)>;

struct EvalOptions {
  std::size_t rounds = 3;
  ExecutionMode mode = ExecutionMode::Composite;
  std::optional<AttackSpec> attack;
  bool summarizer_full_history = false;
  std::size_t threads = 1;  // concurrent items; requires a thread-safe backend
};

struct EvalItem {
  std::string query;
  std::optional<GroupGraph> graph;
  std::string answer;
  bool success = false;
  TokenStats stats;
  std::optional<std::string> error;
};

struct EvalReport {
  std::size_t items = 0;
  std::size_t correct = 0;
  std::size_t failed = 0;  // items that raised an error
  double accuracy = 0;
  double mean_prompt_tokens = 0;
  double mean_response_tokens = 0;
  double mean_total_tokens = 0;
  std::vector<EvalItem> records;
};

inline EvalItem evaluate_one(const QueryItem& item, const GeneratorFn& generator,
                             const GroupPool& pool, AgentBackend& backend,
                             const EvalOptions& opt) {
  EvalItem rec;
  rec.query = item.query;
  try {
    rec.graph = generator(item);
    const auto agents = materialize_agent_graph(*rec.graph, pool, opt.mode);
    RunOptions ro;
    ro.rounds = opt.rounds;
    ro.attack = opt.attack;
    ro.summarizer_full_history = opt.summarizer_full_history;
    const auto tr = run_item(agents, backend, item, ro);
    rec.stats = tr.stats;
    if (tr.aborted()) {
      rec.error = summarize_failure(*tr.failure);
      return rec;
    }
    rec.answer = tr.final_answer;
    rec.success = tr.success.value_or(false);
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

inline EvalReport evaluate(const std::vector<QueryItem>& dataset, const GeneratorFn& generator,
                           const GroupPool& pool, AgentBackend& backend,
                           const EvalOptions& opt = {}) {
  EvalReport rep;
  rep.records.resize(dataset.size());
  if (opt.threads > 1 && backend.thread_safe()) {
    for (std::size_t s = 0; s < dataset.size(); s += opt.threads) {
      std::vector<std::future<EvalItem>> fs;
      const std::size_t e = std::min(dataset.size(), s + opt.threads);
      for (std::size_t k = s; k < e; ++k)
        fs.push_back(std::async(std::launch::async, evaluate_one, std::cref(dataset[k]),
                                std::cref(generator), std::cref(pool), std::ref(backend),
                                std::cref(opt)));
      for (std::size_t k = s; k < e; ++k) rep.records[k] = fs[k - s].get();
    }
  } else {
    for (std::size_t k = 0; k < dataset.size(); ++k)
      rep.records[k] = evaluate_one(dataset[k], generator, pool, backend, opt);
  }
  rep.items = dataset.size();
  TokenCount sum;
  for (const auto& r : rep.records) {
    if (r.success) ++rep.correct;
    if (r.error) ++rep.failed;
    sum += r.stats.totals;
  }
  if (rep.items > 0) {
    const double n = static_cast<double>(rep.items);
    rep.accuracy = static_cast<double>(rep.correct) / n;
    rep.mean_prompt_tokens = static_cast<double>(sum.prompt) / n;
    rep.mean_response_tokens = static_cast<double>(sum.response) / n;
    rep.mean_total_tokens = static_cast<double>(sum.total()) / n;
  }
  return rep;
}

/// Adapter so exploration can label graphs with the harness.
inline Executor harness_executor(const GroupPool& pool, AgentBackend& backend,
                                 std::size_t rounds = 1,
                                 ExecutionMode mode = ExecutionMode::Composite) {
  return [&pool, &backend, rounds, mode](const QueryItem& item, const GroupGraph& g) {
    const auto agents = materialize_agent_graph(g, pool, mode);
    RunOptions ro;
    ro.rounds = rounds;
    const auto tr = run_item(agents, backend, item, ro);
    if (tr.aborted()) throw BackendError(summarize_failure(*tr.failure));
    return ExecResult{tr.final_answer, tr.stats.total()};
  };
}

}  // namespace goa
