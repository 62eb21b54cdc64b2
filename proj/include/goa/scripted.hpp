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

// Deterministic scripted backends used by tests, demos and the CLI.

#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "goa/harness.hpp"

namespace goa::scripted {

/// Sections of a prompt produced by compose_prompt.
struct ParsedPrompt {
  std::string system;
  std::string query;
  std::vector<UpstreamMessage> upstream;
  std::optional<std::string> previous;
};

inline ParsedPrompt parse_prompt(std::string_view prompt) {
  ParsedPrompt out;
  const std::string sys_open = std::string(kSystemHeader) + "\n";
  const std::string task_open = "\n\n" + std::string(kTaskHeader) + "\n";
  std::size_t pos = 0;
  if (prompt.substr(0, sys_open.size()) == sys_open) pos = sys_open.size();
  const std::size_t task = prompt.find(task_open, pos);
  if (task == std::string_view::npos) {
    out.system = std::string(prompt.substr(pos));
    return out;
  }
  out.system = std::string(prompt.substr(pos, task - pos));
  pos = task + task_open.size();

  // remaining sections start with "\n\n[Upstream: " or "\n\n[Your previous response]"
  auto next_section = [&](std::size_t from) {
    std::size_t best = std::string_view::npos;
    for (std::string_view marker : {std::string_view("\n\n[Upstream: "),
                                    std::string_view("\n\n[Your previous response]\n")}) {
      const std::size_t p = prompt.find(marker, from);
      if (p < best) best = p;
    }
    return best;
  };
  std::size_t end = next_section(pos);
  out.query = std::string(prompt.substr(pos, end == std::string_view::npos ? prompt.npos : end - pos));
  while (end != std::string_view::npos) {
    pos = end + 2;
    const std::size_t nl = prompt.find('\n', pos);
    if (nl == std::string_view::npos) break;
    const std::string_view header = prompt.substr(pos, nl - pos);
    end = next_section(nl + 1);
    const std::string body(prompt.substr(nl + 1, end == std::string_view::npos ? prompt.npos
                                                                                : end - nl - 1));
    if (header == kPreviousHeader) {
      out.previous = body;
    } else if (header.size() > 12 && header.back() == ']') {
      out.upstream.push_back({std::string(header.substr(11, header.size() - 12)), body});
    }
  }
  return out;
}

/// Backend returning the composed prompt unchanged.
inline std::shared_ptr<ScriptedBackend> make_echo_backend() {
  return std::make_shared<ScriptedBackend>(
      [](const std::string&, const std::string& prompt) { return prompt; });
}

/// Backend whose reply is a fixed-size body plus one fixed-size note per input
/// message (each upstream response and the previous own response). Reply length
/// depends on the number of inputs, not on their size, so cost grows with edge
/// count without compounding along long paths.
inline std::shared_ptr<ScriptedBackend> make_digest_backend(std::size_t body_words = 32,
                                                            std::size_t note_words = 8) {
  return std::make_shared<ScriptedBackend>([body_words, note_words](const std::string& role,
                                                                    const std::string& prompt) {
    const auto parsed = parse_prompt(prompt);
    std::string out = role + " notes:";
    for (std::size_t i = 0; i < body_words; ++i) out += " work";
    auto note = [&](const std::string& source) {
      out += " [" + source + "]";
      for (std::size_t i = 0; i < note_words; ++i) out += " ok";
    };
    for (const auto& u : parsed.upstream) note(u.role);
    if (parsed.previous) note("self");
    if (parsed.upstream.empty() && !parsed.previous) note("task");
    return out;
  });
}

// ---------------------------------------------------------------------------
// Oracle

inline constexpr std::string_view kUnknownAnswer = "unknown";
inline constexpr std::string_view kCorruptedAnswer = "corrupted";
inline constexpr std::string_view kDefaultTrigger = "IGNORE PREVIOUS INSTRUCTIONS";

struct OracleEntry {
  std::string gold;
  std::vector<std::string> requires_roles;
};

/// Scripted stand-in for an LLM team. An agent knows the answer once the roles
/// required by the query are covered by itself and its upstream agents. A
/// system prompt containing the trigger makes the agent answer wrongly, and the
/// wrong answer wins over everything downstream.
class OracleBackend : public AgentBackend {
 public:
  OracleBackend(std::map<std::string, OracleEntry> table,
                std::string trigger = std::string(kDefaultTrigger))
      : table_(std::move(table)), trigger_(std::move(trigger)) {}

  static OracleBackend from_items(const std::vector<QueryItem>& items,
                                  std::string trigger = std::string(kDefaultTrigger)) {
    std::map<std::string, OracleEntry> t;
    for (const auto& q : items) t[q.query] = {q.gold, q.requires_roles};
    return OracleBackend(std::move(t), std::move(trigger));
  }

  BackendKind kind() const override { return BackendKind::Scripted; }
  bool thread_safe() const override { return true; }

  AgentReply call(const AgentRequest& r) override { return {respond(r.role, r.prompt), std::nullopt}; }

  std::string respond(const std::string& role, const std::string& prompt) const {
    const auto parsed = parse_prompt(prompt);
    std::vector<std::string> answers;
    std::set<std::string> covered;
    for (const auto& u : parsed.upstream) read_reply(u.response, answers, covered);
    if (role == kSummarizerRole) {
      for (const auto& a : answers)
        if (a != kUnknownAnswer) return a;
      return std::string(kUnknownAnswer);
    }
    if (parsed.previous) {
      std::vector<std::string> ignored;
      read_reply(*parsed.previous, ignored, covered);
    }
    const bool attacked = !trigger_.empty() && parsed.system.find(trigger_) != std::string::npos;
    bool corrupted = attacked;
    for (const auto& a : answers)
      if (a == kCorruptedAnswer) corrupted = true;

    std::string answer(kUnknownAnswer);
    auto it = table_.find(trim(parsed.query));
    if (it != table_.end()) {
      for (const auto& req : it->second.requires_roles)
        if (role.find(req) != std::string::npos || parsed.system.find(req) != std::string::npos)
          covered.insert(req);
      bool all = true;
      for (const auto& req : it->second.requires_roles) all = all && covered.contains(req);
      if (all) answer = it->second.gold;
    }
    if (corrupted) answer = std::string(kCorruptedAnswer);

    std::string out = "role: " + role + "\ncovered: ";
    bool first = true;
    for (const auto& c : covered) {
      if (!first) out += ",";
      out += c;
      first = false;
    }
    out += "\nanswer: " + answer;
    return out;
  }

 private:
  static void read_reply(const std::string& text, std::vector<std::string>& answers,
                         std::set<std::string>& covered) {
    std::istringstream in(text);
    std::string line;
    bool any_answer = false;
    while (std::getline(in, line)) {
      if (line.rfind("covered: ", 0) == 0) {
        std::stringstream ss(line.substr(9));
        for (std::string c; std::getline(ss, c, ',');)
          if (!trim(c).empty()) covered.insert(trim(c));
      } else if (line.rfind("answer: ", 0) == 0) {
        answers.push_back(trim(line.substr(8)));
        any_answer = true;
      }
    }
    // summarizer replies are bare answers
    if (!any_answer && text.find('\n') == std::string::npos && !trim(text).empty())
      answers.push_back(trim(text));
  }

  std::map<std::string, OracleEntry> table_;
  std::string trigger_;
};

/// Backend that answers every call with the gold answer of the query.
inline std::shared_ptr<ScriptedBackend> make_gold_backend(const std::vector<QueryItem>& items) {
  std::map<std::string, std::string> gold;
  for (const auto& q : items) gold[q.query] = q.gold;
  return std::make_shared<ScriptedBackend>(
      [gold](const std::string&, const std::string& prompt) -> std::string {
        auto it = gold.find(trim(parse_prompt(prompt).query));
        return it == gold.end() ? std::string(kUnknownAnswer) : it->second;
      });
}

}  // namespace goa::scripted
