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

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace goa {

enum class AnswerMatch { Exact, Numeric, Contains };

inline std::string_view to_string(AnswerMatch m) {
  switch (m) {
    case AnswerMatch::Exact: return "exact";
    case AnswerMatch::Numeric: return "numeric";
    case AnswerMatch::Contains: return "contains";
  }
  return "?";
}

inline std::optional<AnswerMatch> parse_answer_match(std::string_view s) {
  for (auto m : {AnswerMatch::Exact, AnswerMatch::Numeric, AnswerMatch::Contains})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

/// A task query with its gold answer. `requires_roles` is only consulted by
/// the scripted oracle backend.
struct QueryItem {
  std::string query;
  std::string gold;
  AnswerMatch match = AnswerMatch::Exact;
  double tolerance = 1e-6;
  std::vector<std::string> requires_roles;

  friend bool operator==(const QueryItem&, const QueryItem&) = default;
};

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Last number appearing in `text`, if any.
inline std::optional<double> last_number(std::string_view text) {
  std::optional<double> found;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    const bool starts = std::isdigit(static_cast<unsigned char>(c)) ||
                        ((c == '-' || c == '.') && i + 1 < text.size() &&
                         std::isdigit(static_cast<unsigned char>(text[i + 1])));
    if (!starts) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) ||
                               text[j] == '.' || text[j] == ','))
      ++j;
    std::string num;
    for (std::size_t k = i; k < j; ++k)
      if (text[k] != ',') num += text[k];
    while (!num.empty() && num.back() == '.') num.pop_back();
    char* end = nullptr;
    const double v = std::strtod(num.c_str(), &end);
    if (end && *end == '\0' && !num.empty()) found = v;
    i = j;
  }
  return found;
}

inline bool answer_matches(const QueryItem& item, std::string_view answer) {
  switch (item.match) {
    case AnswerMatch::Exact:
      return trim(answer) == trim(item.gold);
    case AnswerMatch::Contains:
      return answer.find(trim(item.gold)) != std::string_view::npos;
    case AnswerMatch::Numeric: {
      auto got = last_number(answer);
      auto want = last_number(item.gold);
      return got && want && std::abs(*got - *want) <= item.tolerance;
    }
  }
  return false;
}

}  // namespace goa
