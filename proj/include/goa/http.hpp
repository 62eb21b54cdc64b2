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

// HTTP clients: a chat-completion agent backend and a sentence-encoder client.
// Define CPPHTTPLIB_OPENSSL_SUPPORT (and link OpenSSL) for https endpoints.

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "goa/embedding.hpp"
#include "goa/error.hpp"
#include "goa/harness.hpp"

namespace goa::http {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // starts with '/'
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.empty())
    throw ConfigError("endpoint URL must look like http://host[:port]/path, got '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline std::string env_or(const char* name, std::string fallback = {}) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

struct ClientConfig {
  std::string url;
  std::string key;
  int timeout_seconds = 60;
  int retries = 2;
  int backoff_ms = 200;
};

/// POSTs a JSON body, retrying transport errors, 429 and 5xx responses.
inline nlohmann::json post_json(const ClientConfig& cfg, const nlohmann::json& body) {
  const auto ep = split_url(cfg.url);
  httplib::Client cli(ep.base);
  cli.set_connection_timeout(cfg.timeout_seconds, 0);
  cli.set_read_timeout(cfg.timeout_seconds, 0);
  cli.set_write_timeout(cfg.timeout_seconds, 0);
  httplib::Headers headers;
  if (!cfg.key.empty()) headers.emplace("Authorization", "Bearer " + cfg.key);
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_ms * attempt));
    auto res = cli.Post(ep.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw BackendError(cfg.url + ": HTTP " + std::to_string(res->status) + ": " +
                         res->body.substr(0, 200));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(cfg.url + ": malformed JSON response: " + e.what());
    }
  }
  throw BackendError(cfg.url + ": giving up after " + std::to_string(cfg.retries + 1) +
                     " attempts (" + last_error + ")");
}

struct ChatConfig : ClientConfig {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;

  static ChatConfig from_env() {
    ChatConfig c;
    c.url = env_or("GOA_LLM_URL");
    c.key = env_or("GOA_LLM_KEY");
    if (c.url.empty()) throw ConfigError("GOA_LLM_URL is not set");
    return c;
  }
};

/// Chat-completion backend. Provider-reported usage is passed through.
class HttpBackend : public AgentBackend {
 public:
  explicit HttpBackend(ChatConfig cfg) : cfg_(std::move(cfg)) { split_url(cfg_.url); }

  BackendKind kind() const override { return BackendKind::Http; }
  bool thread_safe() const override { return true; }

  AgentReply call(const AgentRequest& r) override {
    nlohmann::json body = {
        {"model", cfg_.model},
        {"messages",
         nlohmann::json::array({{{"role", "system"}, {"content", r.system_prompt}},
                                {{"role", "user"}, {"content", r.user_prompt}}})},
        {"temperature", cfg_.temperature}};
    const auto res = post_json(cfg_, body);
    AgentReply reply;
    try {
      reply.text = res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw BackendError(cfg_.url + ": response lacks choices[0].message.content");
    }
    if (res.contains("usage") && res["usage"].is_object()) {
      const auto& u = res["usage"];
      if (u.contains("prompt_tokens") && u.contains("completion_tokens"))
        reply.usage = ReportedUsage{u["prompt_tokens"].get<std::uint64_t>(),
                                    u["completion_tokens"].get<std::uint64_t>()};
    }
    return reply;
  }

  const ChatConfig& config() const { return cfg_; }

 private:
  ChatConfig cfg_;
};

/// Sentence-encoder client: POST {texts} -> {vectors}.
class HttpEncoder : public TextEncoder {
 public:
  explicit HttpEncoder(ClientConfig cfg) : cfg_(std::move(cfg)) { split_url(cfg_.url); }

  static ClientConfig config_from_env() {
    ClientConfig c;
    c.url = env_or("GOA_ENCODER_URL");
    c.key = env_or("GOA_ENCODER_KEY");
    if (c.url.empty()) throw ConfigError("GOA_ENCODER_URL is not set");
    return c;
  }

  std::vector<Vector> encode(const std::vector<std::string>& texts) override {
    const auto res = post_json(cfg_, {{"texts", texts}});
    try {
      return res.at("vectors").get<std::vector<Vector>>();
    } catch (const nlohmann::json::exception&) {
      throw BackendError(cfg_.url + ": response lacks a numeric 'vectors' array");
    }
  }

 private:
  ClientConfig cfg_;
};

}  // namespace goa::http
