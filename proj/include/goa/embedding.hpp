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
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "goa/graph.hpp"
#include "goa/params.hpp"
#include "goa/task.hpp"

namespace goa {

enum class EmbeddingKind { HashFeature, ExternalEncoder };

/// Batch sentence encoder reached over some transport (see goa/http.hpp).
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::vector<Vector> encode(const std::vector<std::string>& texts) = 0;
};

struct EmbeddingProvider {
  EmbeddingKind kind = EmbeddingKind::HashFeature;
  std::size_t dim = 384;
  std::shared_ptr<TextEncoder> external;

  static EmbeddingProvider hash(std::size_t dim) {
    if (dim == 0) throw ConfigError("embedding dim must be positive");
    return {EmbeddingKind::HashFeature, dim, nullptr};
  }
  static EmbeddingProvider encoder(std::size_t dim, std::shared_ptr<TextEncoder> enc) {
    if (dim == 0) throw ConfigError("embedding dim must be positive");
    if (!enc) throw ConfigError("external embedding provider needs an encoder");
    return {EmbeddingKind::ExternalEncoder, dim, std::move(enc)};
  }

  std::string_view kind_name() const {
    return kind == EmbeddingKind::HashFeature ? "hash" : "external";
  }
};

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Lowercased maximal runs of ASCII alphanumerics.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline void l2_normalize(Vector& v) {
  const double n = std::sqrt(squared_norm<Real>(v));
  if (n > 0.0)
    for (auto& x : v) x /= n;
}

/// Signed feature hashing of unigrams and bigrams: bucket = hash mod d, sign
/// from bit 63 of the hash.
inline Vector hash_embed(std::string_view text, std::size_t dim) {
  Vector v(dim, 0.0);
  const auto tokens = tokenize(text);
  auto add = [&](std::string_view feature) {
    const auto h = fnv1a64(feature);
    v[h % dim] += (h >> 63) ? -1.0 : 1.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add(tokens[i]);
    if (i + 1 < tokens.size()) add(tokens[i] + " " + tokens[i + 1]);
  }
  l2_normalize(v);
  return v;
}

inline std::vector<Vector> embed_texts(const EmbeddingProvider& provider,
                                       const std::vector<std::string>& texts) {
  for (const auto& t : texts)
    if (trim(t).empty()) throw ConfigError("embed_text: text is empty");
  std::vector<Vector> out;
  if (provider.kind == EmbeddingKind::HashFeature) {
    for (const auto& t : texts) out.push_back(hash_embed(t, provider.dim));
    return out;
  }
  out = provider.external->encode(texts);
  if (out.size() != texts.size())
    throw BackendError("encoder returned " + std::to_string(out.size()) + " vectors for " +
                       std::to_string(texts.size()) + " texts");
  for (auto& v : out) {
    if (v.size() != provider.dim)
      throw BackendError("encoder returned dim " + std::to_string(v.size()) + ", expected " +
                         std::to_string(provider.dim));
    l2_normalize(v);
  }
  return out;
}

inline Vector embed_text(const EmbeddingProvider& provider, std::string_view text) {
  return embed_texts(provider, {std::string(text)}).front();
}

// ---------------------------------------------------------------------------
// Task encoder: z_q = W2 relu(W1 e + b1) + b2

struct TaskEmbedding {
  Vector z_q;
};

struct TaskEncoderCache {
  Vector input;
  Vector pre;     // W1 e + b1
  Vector hidden;  // relu(pre)
};

inline Vector task_encoder_forward(const ModelParams& p, std::span<const Real> input,
                                   TaskEncoderCache* cache = nullptr) {
  if (p.task_out.out() != input.size() || p.task_in.in() != input.size())
    throw ConfigError("encode_task: embedding dim " + std::to_string(input.size()) +
                      " does not match task encoder " + p.task_in.W.shape_string());
  Vector pre = nn::affine(p.task_in, input);
  Vector hidden = nn::relu<Real>(pre);
  Vector z = nn::affine(p.task_out, std::span<const Real>(hidden));
  if (cache) *cache = {Vector(input.begin(), input.end()), std::move(pre), std::move(hidden)};
  return z;
}

/// Accumulates parameter gradients of the task encoder given dL/dz_q.
inline void task_encoder_backward(const ModelParams& p, const TaskEncoderCache& c,
                                  std::span<const Real> gz, ModelParams& grads) {
  Vector ghidden(c.hidden.size(), 0.0);
  nn::affine_backward<Real>(p.task_out, c.hidden, gz, grads.task_out, ghidden);
  const Vector gpre = nn::relu_backward<Real>(c.pre, ghidden);
  nn::affine_backward<Real>(p.task_in, c.input, gpre, grads.task_in, {});
}

inline TaskEmbedding encode_task(const ModelParams& p, const EmbeddingProvider& provider,
                                 std::string_view query) {
  const Vector e = embed_text(provider, query);
  return {task_encoder_forward(p, e)};
}

// ---------------------------------------------------------------------------
// Candidate matrix

/// (K + 1) x d: one row per group, END at row K.
struct CandidateMatrix {
  Matrix x;

  std::size_t groups() const noexcept { return x.rows() == 0 ? 0 : x.rows() - 1; }
  std::size_t end_index() const noexcept { return groups(); }
  std::span<const Real> row(std::size_t k) const { return x.row(k); }
};

inline std::string group_text(const CandidateGroup& g) {
  std::string roles;
  for (const auto& r : g.roles) roles += (roles.empty() ? "" : ",") + r;
  return g.name + " | " + g.expertise + " | " + roles + " | " + std::string(to_string(g.intra_topology));
}

/// Fixed K x d group rows. Computed once per pool and never trained.
inline Matrix group_rows(const EmbeddingProvider& provider, const GroupPool& pool) {
  if (pool.groups.empty()) throw ConfigError("build_candidate_matrix: empty pool");
  std::vector<std::string> texts;
  for (const auto& g : pool.groups) texts.push_back(group_text(g));
  const auto vecs = embed_texts(provider, texts);
  Matrix rows(pool.size(), provider.dim);
  for (std::size_t k = 0; k < vecs.size(); ++k)
    std::copy(vecs[k].begin(), vecs[k].end(), rows.row(k).begin());
  return rows;
}

inline CandidateMatrix assemble_candidate_matrix(const Matrix& rows, const ModelParams& p) {
  if (rows.rows() == 0) throw ConfigError("candidate matrix needs at least one group");
  if (rows.cols() != p.end_embedding.rows())
    throw ConfigError("candidate rows have dim " + std::to_string(rows.cols()) +
                      ", END embedding has dim " + std::to_string(p.end_embedding.rows()));
  CandidateMatrix m{Matrix(rows.rows() + 1, rows.cols())};
  std::copy(rows.values().begin(), rows.values().end(), m.x.values().begin());
  std::copy(p.end_embedding.values().begin(), p.end_embedding.values().end(),
            m.x.row(rows.rows()).begin());
  return m;
}

inline CandidateMatrix build_candidate_matrix(const ModelParams& p,
                                              const EmbeddingProvider& provider,
                                              const GroupPool& pool) {
  return assemble_candidate_matrix(group_rows(provider, pool), p);
}

}  // namespace goa
