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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "goa/nn.hpp"
#include "goa/optim.hpp"
#include "goa/records.hpp"
#include "goa/rng.hpp"

namespace goa {

using Real = double;
using Vector = Vec<Real>;
using Matrix = Tensor<Real>;

struct ModelConfig {
  std::size_t d = 384;         // embedding dim
  std::size_t h = 256;         // hidden dim of every MLP
  std::size_t K = 16;          // pool size
  std::size_t max_steps = 8;   // generation cap
  double beta_g = 0.0;
  double beta_e = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (d == 0 || h == 0 || K == 0 || max_steps == 0)
      throw ConfigError("ModelConfig: d, h, K and max_steps must be positive");
    if (!(beta_g >= 0.0) || !(beta_e >= 0.0))
      throw ConfigError("ModelConfig: bottleneck weights must be non-negative");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Mean and log-standard-deviation projections of one diagonal Gaussian.
struct GaussianHeadParams {
  nn::Affine<Real> mu;
  nn::Affine<Real> log_sigma;

  GaussianHeadParams() = default;
  GaussianHeadParams(std::size_t out, std::size_t in) : mu(out, in), log_sigma(out, in) {}

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    mu.visit(prefix + ".mu", f);
    log_sigma.visit(prefix + ".log_sigma", f);
  }
};

/// Every learnable tensor of the generator.
struct ModelParams {
  nn::Affine<Real> task_in, task_out;          // d -> h -> d
  nn::GruParams<Real> history;                 // over selected group embeddings
  nn::GruParams<Real> group_gru;               // fused state -> raw group feature
  nn::Affine<Real> edge_proj_in, edge_proj_out;  // 3d -> h -> d
  nn::GruParams<Real> edge_gru;
  Matrix step_embedding;                       // max_steps x d
  GaussianHeadParams group_encoder, edge_encoder;
  GaussianHeadParams group_prior, edge_prior;  // conditioned on the task vector
  nn::Affine<Real> edge_head_in, edge_head_out;  // d -> h -> 1
  Matrix end_embedding;                        // d x 1

  static ModelParams zeros(const ModelConfig& c) {
    c.validate();
    ModelParams p;
    p.task_in = {c.h, c.d};
    p.task_out = {c.d, c.h};
    p.history = {c.d, c.d};
    p.group_gru = {c.d, c.d};
    p.edge_proj_in = {c.h, 3 * c.d};
    p.edge_proj_out = {c.d, c.h};
    p.edge_gru = {c.d, c.d};
    p.step_embedding = Matrix(c.max_steps, c.d);
    p.group_encoder = {c.d, c.d};
    p.edge_encoder = {c.d, c.d};
    p.group_prior = {c.d, c.d};
    p.edge_prior = {c.d, c.d};
    p.edge_head_in = {c.h, c.d};
    p.edge_head_out = {1, c.h};
    p.end_embedding = Matrix(c.d, 1);
    return p;
  }

  /// Uniform(+-1/sqrt(fan_in)) weights and biases; small step embeddings; an
  /// END row of roughly unit norm.
  static ModelParams random(const ModelConfig& c, std::uint64_t seed) {
    ModelParams p = zeros(c);
    CounterRng rng(seed);
    p.visit([&](const std::string& name, Matrix& t) {
      if (name == "step_embedding") {
        for (auto& v : t.values()) v = 0.1 * (2.0 * rng.uniform() - 1.0);
      } else if (name == "end_embedding") {
        for (auto& v : t.values()) v = rng.normal() / std::sqrt(static_cast<double>(c.d));
      }
    });
    auto init_fan = [&](Matrix& t, std::size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : t.values()) v = bound * (2.0 * rng.uniform() - 1.0);
    };
    auto affine = [&](nn::Affine<Real>& a) {
      init_fan(a.W, a.in());
      init_fan(a.b, a.in());
    };
    auto gru = [&](nn::GruParams<Real>& g) {
      for (Matrix* t : {&g.Wz, &g.Uz, &g.bz, &g.Wr, &g.Ur, &g.br, &g.Wn, &g.Un, &g.bn})
        init_fan(*t, g.hidden());
    };
    affine(p.task_in);
    affine(p.task_out);
    gru(p.history);
    gru(p.group_gru);
    affine(p.edge_proj_in);
    affine(p.edge_proj_out);
    gru(p.edge_gru);
    for (auto* head : {&p.group_encoder, &p.edge_encoder, &p.group_prior, &p.edge_prior}) {
      affine(head->mu);
      affine(head->log_sigma);
    }
    affine(p.edge_head_in);
    affine(p.edge_head_out);
    return p;
  }

  ModelParams zeros_like() const {
    ModelParams g = *this;
    g.visit([](const std::string&, Matrix& t) { t.fill(0.0); });
    return g;
  }

  template <class F>
  void visit(F&& f) {
    task_in.visit("task_in", f);
    task_out.visit("task_out", f);
    history.visit("history", f);
    group_gru.visit("group_gru", f);
    edge_proj_in.visit("edge_proj_in", f);
    edge_proj_out.visit("edge_proj_out", f);
    edge_gru.visit("edge_gru", f);
    f(std::string("step_embedding"), step_embedding);
    group_encoder.visit("group_encoder", f);
    edge_encoder.visit("edge_encoder", f);
    group_prior.visit("group_prior", f);
    edge_prior.visit("edge_prior", f);
    edge_head_in.visit("edge_head_in", f);
    edge_head_out.visit("edge_head_out", f);
    f(std::string("end_embedding"), end_embedding);
  }

  template <class F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit(
        [&](const std::string& n, Matrix& t) { f(n, static_cast<const Matrix&>(t)); });
  }

  /// Flattened copy in visitation order.
  Vector flatten() const {
    Vector out;
    visit([&](const std::string&, const Matrix& t) {
      out.insert(out.end(), t.values().begin(), t.values().end());
    });
    return out;
  }

  void unflatten(std::span<const Real> flat) {
    std::size_t off = 0;
    visit([&](const std::string&, Matrix& t) {
      if (off + t.size() > flat.size()) throw ConfigError("unflatten: vector too short");
      std::copy_n(flat.begin() + off, t.size(), t.values().begin());
      off += t.size();
    });
    if (off != flat.size()) throw ConfigError("unflatten: vector too long");
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Matrix& t) { ok = ok && t.all_finite(); });
    return ok;
  }

  /// Adds `scale * other` tensor-wise.
  void add_scaled(const ModelParams& other, Real scale) {
    auto mine = collect_tensors<Real>(*this);
    auto theirs = collect_tensors<Real>(const_cast<ModelParams&>(other));
    for (std::size_t k = 0; k < mine.size(); ++k) axpy<Real>(scale, theirs[k].second->values(), mine[k].second->values());
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    auto x = collect_tensors<Real>(const_cast<ModelParams&>(a));
    auto y = collect_tensors<Real>(const_cast<ModelParams&>(b));
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (!(*x[k].second == *y[k].second)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary dump of the config, every named tensor and
// the optimizer moments. Reals are stored as raw IEEE-754 doubles.

struct Checkpoint {
  ModelConfig config;
  std::string embedding_kind = "hash";
  std::uint64_t epochs_completed = 0;
  ModelParams params;
  std::optional<OptimizerState<Real>> optimizer;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'G', 'O', 'A', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  template <class T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint64_t>(s.size()));
    buf_ += s;
  }
  void tensor(const Matrix& t) {
    pod(static_cast<std::uint64_t>(t.rows()));
    pod(static_cast<std::uint64_t>(t.cols()));
    buf_.append(reinterpret_cast<const char*>(t.values().data()), t.size() * sizeof(Real));
  }
  const std::string& bytes() const { return buf_; }
  std::string& raw() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}

  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Matrix tensor() {
    const auto r = pod<std::uint64_t>();
    const auto c = pod<std::uint64_t>();
    if (c != 0 && r > (buf_.size() - pos_) / sizeof(Real) / c) fail("tensor larger than file");
    Matrix t(r, c);
    need(t.size() * sizeof(Real));
    std::memcpy(t.values().data(), buf_.data() + pos_, t.size() * sizeof(Real));
    pos_ += t.size() * sizeof(Real);
    return t;
  }
  bool done() const { return pos_ == buf_.size(); }
  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError("checkpoint: " + why, 1, pos_);
  }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) fail("unexpected end of file");
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  detail::Writer w;
  w.raw().append(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  const auto& c = ck.config;
  w.pod<std::uint64_t>(c.d);
  w.pod<std::uint64_t>(c.h);
  w.pod<std::uint64_t>(c.K);
  w.pod<std::uint64_t>(c.max_steps);
  w.pod(c.beta_g);
  w.pod(c.beta_e);
  w.pod(c.seed);
  w.str(ck.embedding_kind);
  w.pod(ck.epochs_completed);
  std::uint64_t count = 0;
  ck.params.visit([&](const std::string&, const Matrix&) { ++count; });
  w.pod(count);
  ck.params.visit([&](const std::string& name, const Matrix& t) {
    w.str(name);
    w.tensor(t);
  });
  w.pod<std::uint8_t>(ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    const auto& o = *ck.optimizer;
    for (double v : {o.hyper.lr, o.hyper.weight_decay, o.hyper.clip_norm, o.hyper.beta1,
                     o.hyper.beta2, o.hyper.epsilon})
      w.pod(v);
    w.pod(o.step);
    w.pod<std::uint64_t>(o.names.size());
    for (std::size_t k = 0; k < o.names.size(); ++k) {
      w.str(o.names[k]);
      w.tensor(o.first_moment[k]);
      w.tensor(o.second_moment[k]);
    }
  }
  return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::string bytes) {
  if (bytes.size() < sizeof(detail::kCheckpointMagic) ||
      std::memcmp(bytes.data(), detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic)) != 0)
    throw ParseError("checkpoint: bad magic", 1, 0);
  detail::Reader r(bytes.substr(sizeof(detail::kCheckpointMagic)));
  Checkpoint ck;
  auto& c = ck.config;
  c.d = r.pod<std::uint64_t>();
  c.h = r.pod<std::uint64_t>();
  c.K = r.pod<std::uint64_t>();
  c.max_steps = r.pod<std::uint64_t>();
  c.beta_g = r.pod<double>();
  c.beta_e = r.pod<double>();
  c.seed = r.pod<std::uint64_t>();
  c.validate();
  ck.embedding_kind = r.str();
  ck.epochs_completed = r.pod<std::uint64_t>();
  ck.params = ModelParams::zeros(c);
  const auto count = r.pod<std::uint64_t>();
  auto refs = collect_tensors<Real>(ck.params);
  if (count != refs.size()) r.fail("tensor count does not match the config");
  for (auto& [name, t] : refs) {
    if (r.str() != name) r.fail("expected tensor '" + name + "'");
    Matrix loaded = r.tensor();
    if (loaded.rows() != t->rows() || loaded.cols() != t->cols())
      r.fail("shape mismatch for '" + name + "'");
    *t = std::move(loaded);
  }
  if (r.pod<std::uint8_t>() != 0) {
    OptimizerState<Real> o;
    for (double* v : {&o.hyper.lr, &o.hyper.weight_decay, &o.hyper.clip_norm, &o.hyper.beta1,
                      &o.hyper.beta2, &o.hyper.epsilon})
      *v = r.pod<double>();
    o.step = r.pod<std::uint64_t>();
    const auto n = r.pod<std::uint64_t>();
    if (n != refs.size()) r.fail("optimizer tensor count does not match the config");
    for (std::size_t k = 0; k < n; ++k) {
      o.names.push_back(r.str());
      o.first_moment.push_back(r.tensor());
      o.second_moment.push_back(r.tensor());
    }
    ck.optimizer = std::move(o);
  }
  if (!r.done()) r.fail("trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& p, const Checkpoint& ck) {
  records::write_file_atomic(p, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + p.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(std::move(bytes));
}

}  // namespace goa
