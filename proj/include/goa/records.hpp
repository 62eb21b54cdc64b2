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

// Line-delimited records. Every line is one JSON object carrying
// "v": "v1" and a "type" tag; step edges are written as "i->t" strings.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "goa/graph.hpp"
#include "goa/task.hpp"
#include "json.hpp"

namespace goa::records {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "v1";

namespace detail {

inline std::size_t column_of(const std::string& line, const std::string& needle) {
  const auto pos = line.find(needle);
  return pos == std::string::npos ? 0 : pos;
}

inline json parse_line(const std::string& line, std::size_t line_no) {
  try {
    auto j = json::parse(line);
    if (!j.is_object()) throw ParseError("record must be a JSON object", line_no, 0);
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), line_no,
                     e.byte > 0 ? e.byte - 1 : 0);
  }
}

inline void expect_header(const json& j, std::string_view type, const std::string& line,
                          std::size_t line_no) {
  if (!j.contains("v") || j["v"] != kVersion)
    throw ParseError("record must carry \"v\": \"v1\"", line_no, column_of(line, "\"v\""));
  if (!j.contains("type") || j["type"] != type)
    throw ParseError("expected record type '" + std::string(type) + "'", line_no,
                     column_of(line, "\"type\""));
}

template <class T>
T field(const json& j, const char* key, const std::string& line, std::size_t line_no) {
  if (!j.contains(key))
    throw ParseError(std::string("missing field '") + key + "'", line_no, 0);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad field '") + key + "': " + e.what(), line_no,
                     column_of(line, std::string("\"") + key + "\""));
  }
}

inline StepEdge parse_edge(const std::string& text, const std::string& line, std::size_t line_no) {
  const auto arrow = text.find("->");
  auto digits = [](std::string_view s) {
    return !s.empty() && s.find_first_not_of("0123456789") == std::string_view::npos;
  };
  if (arrow == std::string::npos || !digits(std::string_view(text).substr(0, arrow)) ||
      !digits(std::string_view(text).substr(arrow + 2)))
    throw ParseError("edge '" + text + "' must have the form i->t", line_no,
                     column_of(line, "\"" + text + "\""));
  return {std::stoul(text.substr(0, arrow)), std::stoul(text.substr(arrow + 2))};
}

inline json graph_body(const GroupGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back(std::to_string(e.from) + "->" + std::to_string(e.to));
  return json{{"selected", g.selected}, {"edges", edges}};
}

inline GroupGraph graph_from_body(const json& j, const std::string& line, std::size_t line_no) {
  GroupGraph g;
  if (!j.contains("selected") || !j["selected"].is_array())
    throw ParseError("missing list field 'selected'", line_no, column_of(line, "\"selected\""));
  for (const auto& s : j["selected"])
    if (!s.is_number_unsigned())
      throw ParseError("'selected' must hold non-negative integer group ids", line_no,
                       column_of(line, "\"selected\""));
  g.selected = field<std::vector<std::size_t>>(j, "selected", line, line_no);
  for (const auto& s : field<std::vector<std::string>>(j, "edges", line, line_no)) {
    const auto e = parse_edge(s, line, line_no);
    if (e.from >= e.to)
      throw ParseError("edge '" + s + "' must satisfy i < t", line_no,
                       column_of(line, "\"" + s + "\""));
    if (e.to >= g.selected.size())
      throw ParseError("edge '" + s + "' references a step beyond the selection", line_no,
                       column_of(line, "\"" + s + "\""));
    if (!g.edges.insert(e).second)
      throw ParseError("duplicate edge '" + s + "'", line_no, column_of(line, "\"" + s + "\""));
  }
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline std::string encode_graph(const GroupGraph& g) {
  json j{{"v", kVersion}, {"type", "graph"}};
  j.update(detail::graph_body(g));
  return j.dump();
}

inline GroupGraph decode_graph(const std::string& line, std::size_t line_no = 1) {
  const auto j = detail::parse_line(line, line_no);
  detail::expect_header(j, "graph", line, line_no);
  return detail::graph_from_body(j, line, line_no);
}

inline std::string encode_group(const CandidateGroup& g) {
  json j{{"v", kVersion},
         {"type", "group"},
         {"id", g.id},
         {"name", g.name},
         {"expertise", g.expertise},
         {"roles", g.roles},
         {"intra_topology", std::string(to_string(g.intra_topology))},
         {"role_prompt", g.role_prompt}};
  return j.dump();
}

inline CandidateGroup decode_group(const std::string& line, std::size_t line_no = 1) {
  const auto j = detail::parse_line(line, line_no);
  detail::expect_header(j, "group", line, line_no);
  CandidateGroup g;
  if (j.contains("id") && !j["id"].is_number_unsigned())
    throw ParseError("'id' must be a non-negative integer", line_no, detail::column_of(line, "\"id\""));
  g.id = detail::field<std::size_t>(j, "id", line, line_no);
  g.name = detail::field<std::string>(j, "name", line, line_no);
  g.expertise = detail::field<std::string>(j, "expertise", line, line_no);
  g.roles = detail::field<std::vector<std::string>>(j, "roles", line, line_no);
  const auto topo = detail::field<std::string>(j, "intra_topology", line, line_no);
  auto parsed = parse_intra_topology(topo);
  if (!parsed)
    throw ParseError("unknown intra_topology '" + topo + "'", line_no,
                     detail::column_of(line, "\"intra_topology\""));
  g.intra_topology = *parsed;
  g.role_prompt = detail::field<std::string>(j, "role_prompt", line, line_no);
  return g;
}

inline std::string encode_trajectory(const Trajectory& t) {
  json j{{"v", kVersion},           {"type", "trajectory"},   {"query", t.query},
         {"gold", t.gold},          {"graph", detail::graph_body(t.graph)},
         {"success", t.success},    {"token_cost", t.token_cost}};
  return j.dump();
}

inline Trajectory decode_trajectory(const std::string& line, std::size_t line_no = 1) {
  const auto j = detail::parse_line(line, line_no);
  detail::expect_header(j, "trajectory", line, line_no);
  Trajectory t;
  t.query = detail::field<std::string>(j, "query", line, line_no);
  t.gold = j.value("gold", std::string{});
  if (!j.contains("graph") || !j["graph"].is_object())
    throw ParseError("missing object field 'graph'", line_no, 0);
  t.graph = detail::graph_from_body(j["graph"], line, line_no);
  t.success = j.value("success", true);
  t.token_cost = j.value("token_cost", std::uint64_t{0});
  return t;
}

inline std::string encode_query(const QueryItem& q) {
  json j{{"v", kVersion},  {"type", "query"},
         {"query", q.query}, {"gold", q.gold},
         {"match", std::string(to_string(q.match))}, {"tolerance", q.tolerance},
         {"requires", q.requires_roles}};
  return j.dump();
}

inline QueryItem decode_query(const std::string& line, std::size_t line_no = 1) {
  const auto j = detail::parse_line(line, line_no);
  detail::expect_header(j, "query", line, line_no);
  QueryItem q;
  q.query = detail::field<std::string>(j, "query", line, line_no);
  q.gold = detail::field<std::string>(j, "gold", line, line_no);
  const auto m = j.value("match", std::string("exact"));
  auto parsed = parse_answer_match(m);
  if (!parsed)
    throw ParseError("unknown match rule '" + m + "'", line_no, detail::column_of(line, "\"match\""));
  q.match = *parsed;
  q.tolerance = j.value("tolerance", 1e-6);
  if (j.contains("requires")) q.requires_roles = detail::field<std::vector<std::string>>(j, "requires", line, line_no);
  return q;
}

// ---------------------------------------------------------------------------
// Files

/// Non-empty lines of a text file, paired with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    out.emplace_back(n, line);
  }
  return out;
}

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a partially written artifact.
inline void write_file_atomic(const std::filesystem::path& p, const std::string& content) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

template <class T, class Encode>
std::string join_records(const std::vector<T>& items, Encode&& encode) {
  std::string out;
  for (const auto& it : items) out += encode(it) + "\n";
  return out;
}

inline GroupPool read_pool(const std::filesystem::path& p) {
  GroupPool pool;
  for (const auto& [n, line] : read_lines(p)) pool.groups.push_back(decode_group(line, n));
  return pool;
}

inline void write_pool(const std::filesystem::path& p, const GroupPool& pool) {
  write_file_atomic(p, join_records(pool.groups, encode_group));
}

inline std::vector<Trajectory> read_dataset(const std::filesystem::path& p) {
  std::vector<Trajectory> out;
  for (const auto& [n, line] : read_lines(p)) out.push_back(decode_trajectory(line, n));
  return out;
}

inline void write_dataset(const std::filesystem::path& p, const std::vector<Trajectory>& d) {
  write_file_atomic(p, join_records(d, encode_trajectory));
}

inline std::vector<QueryItem> read_queries(const std::filesystem::path& p) {
  std::vector<QueryItem> out;
  for (const auto& [n, line] : read_lines(p)) out.push_back(decode_query(line, n));
  return out;
}

}  // namespace goa::records
