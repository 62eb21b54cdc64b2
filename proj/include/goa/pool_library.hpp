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

// Bundled math-domain group pool and parsing of LLM-proposed groups.

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "goa/graph.hpp"
#include "goa/task.hpp"

namespace goa::pools {

inline constexpr const char* kSolver = "Math Solver";
inline constexpr const char* kAnalyst = "Mathematical Analyst";
inline constexpr const char* kProgrammer = "Programming Expert";
inline constexpr const char* kInspector = "Inspector";

inline std::string role_duty(const std::string& role) {
  if (role == kSolver) return "works the problem step by step and states a numeric result";
  if (role == kAnalyst) return "breaks the problem into quantities, relations and sub-goals";
  if (role == kProgrammer) return "writes and mentally runs a short program that computes the result";
  if (role == kInspector) return "checks the reasoning and arithmetic of the others and fixes mistakes";
  return "contributes its expertise";
}

/// Composite prompt: one call plays every role of the group in order.
inline std::string composite_prompt(const std::string& name, IntraTopology topo,
                                    const std::vector<std::string>& roles) {
  std::ostringstream os;
  if (roles.size() == 1) {
    os << "You are the " << roles[0] << ", the team member who " << role_duty(roles[0])
       << ". End with a line 'answer: <value>'.";
    return os.str();
  }
  os << "You simulate the " << name << ", a team of " << roles.size() << " roles. ";
  for (const auto& r : roles) os << "The " << r << " " << role_duty(r) << ". ";
  switch (topo) {
    case IntraTopology::Chain:
      os << "They work in sequence: ";
      for (std::size_t i = 0; i < roles.size(); ++i) os << (i ? " then " : "") << roles[i];
      os << ", each building on the previous one. ";
      break;
    case IntraTopology::Star:
      os << "The ";
      for (std::size_t i = 0; i + 1 < roles.size(); ++i) os << (i ? " and the " : "") << roles[i];
      os << " work independently and hand their drafts to the " << roles.back()
         << ", who merges them. ";
      break;
    case IntraTopology::FullConnected:
      os << "Every role reads the notes of all earlier roles before writing its own. ";
      break;
    case IntraTopology::Single:
      break;
  }
  os << "Write each role's contribution under its name, then end with a line 'answer: <value>'.";
  return os.str();
}

inline CandidateGroup make_group(std::size_t id, std::string name, std::string expertise,
                                 IntraTopology topo, std::vector<std::string> roles) {
  CandidateGroup g;
  g.id = id;
  g.role_prompt = composite_prompt(name, topo, roles);
  g.name = std::move(name);
  g.expertise = std::move(expertise);
  g.intra_topology = topo;
  g.roles = std::move(roles);
  return g;
}

/// 16 groups from the four base roles: 4 single roles, 4 two-stage chains,
/// 3 three-stage chains, 3 stars and 2 fully connected teams.
inline GroupPool math_pool() {
  using T = IntraTopology;
  GroupPool p;
  auto add = [&](std::string name, std::string expertise, T topo, std::vector<std::string> roles) {
    p.groups.push_back(make_group(p.groups.size(), std::move(name), std::move(expertise), topo,
                                  std::move(roles)));
  };
  add("Solver Desk", "direct arithmetic and algebra", T::Single, {kSolver});
  add("Analysis Desk", "problem decomposition", T::Single, {kAnalyst});
  add("Coding Desk", "computation by program", T::Single, {kProgrammer});
  add("Review Desk", "verification of worked answers", T::Single, {kInspector});

  add("Analyze-Solve Pair", "decompose then solve", T::Chain, {kAnalyst, kSolver});
  add("Solve-Check Pair", "solve then verify", T::Chain, {kSolver, kInspector});
  add("Code-Check Pair", "program then verify", T::Chain, {kProgrammer, kInspector});
  add("Analyze-Code Pair", "decompose then program", T::Chain, {kAnalyst, kProgrammer});

  add("Analytic Pipeline", "decompose, solve, verify", T::Chain, {kAnalyst, kSolver, kInspector});
  add("Computational Pipeline", "decompose, program, verify", T::Chain,
      {kAnalyst, kProgrammer, kInspector});
  add("Cross-Method Pipeline", "solve by hand, confirm by program, verify", T::Chain,
      {kSolver, kProgrammer, kInspector});

  add("Dual-Draft Review", "two independent drafts merged by a reviewer", T::Star,
      {kProgrammer, kSolver, kInspector});
  add("Plan-and-Solve Review", "plan and solution merged by a reviewer", T::Star,
      {kAnalyst, kSolver, kInspector});
  add("Plan-and-Code Merge", "plan and program merged by a solver", T::Star,
      {kAnalyst, kProgrammer, kSolver});

  add("Analytic Roundtable", "open discussion of analysis, solution and checks", T::FullConnected,
      {kAnalyst, kSolver, kInspector});
  add("Full Roundtable", "every base role in open discussion", T::FullConnected,
      {kAnalyst, kSolver, kProgrammer, kInspector});
  return p;
}

// ---------------------------------------------------------------------------
// LLM-driven discovery

inline std::string discovery_prompt(const std::string& instruction, std::size_t k) {
  std::ostringstream os;
  os << instruction << "\n\nPropose " << k
     << " collaborative expert groups for this domain. Output one JSON object per line with "
        "the fields name (string), expertise (string), roles (non-empty list of role names), "
        "intra_topology (one of Single, Chain, Star, FullConnected) and role_prompt (a single "
        "system prompt that lets one model play every role of the group). Output nothing else.";
  return os.str();
}

struct ProposalReject {
  std::size_t line = 0;
  std::string reason;
};

struct ProposalResult {
  GroupPool pool;
  std::vector<ProposalReject> rejects;
};

/// Parses one JSON object per non-blank line. Invalid records are rejected with
/// a reason; accepted groups get consecutive ids.
inline ProposalResult parse_proposed_groups(const std::string& text) {
  ProposalResult out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> names;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = trim(line);
    if (trimmed.empty() || trimmed.rfind("```", 0) == 0) continue;
    auto reject = [&](std::string why) { out.rejects.push_back({line_no, std::move(why)}); };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(trimmed);
    } catch (const nlohmann::json::exception&) {
      reject("not a JSON object");
      continue;
    }
    if (!j.is_object()) {
      reject("not a JSON object");
      continue;
    }
    std::string missing;
    for (const char* f : {"name", "expertise", "intra_topology", "role_prompt"})
      if (!j.contains(f) || !j[f].is_string()) missing += std::string(missing.empty() ? "" : ", ") + f;
    if (!missing.empty()) {
      reject("missing or non-string field(s): " + missing);
      continue;
    }
    if (!j.contains("roles") || !j["roles"].is_array()) {
      reject("roles must be a list of strings");
      continue;
    }
    CandidateGroup g;
    bool roles_ok = true;
    for (const auto& r : j["roles"]) {
      if (!r.is_string() || trim(r.get<std::string>()).empty()) roles_ok = false;
      else g.roles.push_back(trim(r.get<std::string>()));
    }
    if (!roles_ok || g.roles.empty()) {
      reject("roles must be a non-empty list of non-empty strings");
      continue;
    }
    const auto topo = parse_intra_topology(j["intra_topology"].get<std::string>());
    if (!topo) {
      reject("unknown intra_topology '" + j["intra_topology"].get<std::string>() + "'");
      continue;
    }
    g.intra_topology = *topo;
    if (g.intra_topology == IntraTopology::Single && g.roles.size() != 1) {
      reject("Single topology needs exactly one role");
      continue;
    }
    if (g.intra_topology != IntraTopology::Single && g.roles.size() < 2) {
      reject(std::string(to_string(g.intra_topology)) + " topology needs at least two roles");
      continue;
    }
    g.name = trim(j["name"].get<std::string>());
    g.expertise = j["expertise"].get<std::string>();
    g.role_prompt = j["role_prompt"].get<std::string>();
    if (g.name.empty() || trim(g.role_prompt).empty()) {
      reject("name and role_prompt must be non-empty");
      continue;
    }
    if (!names.insert(g.name).second) {
      reject("duplicate group name '" + g.name + "'");
      continue;
    }
    g.id = out.pool.groups.size();
    out.pool.groups.push_back(std::move(g));
  }
  return out;
}

}  // namespace goa::pools
