// Copyright 2026 The feedrank Authors
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

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "feedrank/error.hpp"
#include "feedrank/types.hpp"

namespace feedrank {

/// A completion call failed. `status` is the HTTP status, or 0 for
/// transport failures (connect, timeout).
class ProviderError : public Error {
 public:
  ProviderError(int status, bool transient, const std::string& message)
      : Error("provider", message), status_(status), transient_(transient) {}

  int status() const noexcept { return status_; }
  bool transient() const noexcept { return transient_; }

 private:
  int status_;
  bool transient_;
};

/// 429, 5xx and transport failures are worth retrying.
bool is_transient_status(int status);

/// complete(text) -> text over some backend.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;

  /// Display name, recorded on generated candidates.
  virtual std::string name() const = 0;
  /// Model identifier; part of the fixture request key.
  virtual std::string model() const = 0;
  /// Throws ProviderError on failure.
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Fixture key: content hash of (model, prompt).
std::string request_hash(const std::string& model, const std::string& prompt);

// ---------------------------------------------------------------------------

struct HttpProviderConfig {
  std::string name;
  std::string base_url;  // e.g. https://api.openai.com
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "FEAT_PROVIDER_KEY";
  std::chrono::milliseconds timeout{60000};
  double requests_per_minute = 0.0;  // 0 = unlimited
  json decoding = json::object();    // merged into the request body (temperature, ...)
};

void from_json(const json& j, HttpProviderConfig& c);

/// OpenAI-compatible chat-completions client. One request per complete()
/// call; retries are layered on top by generate_feedback.
class HttpProvider : public CompletionProvider {
 public:
  explicit HttpProvider(HttpProviderConfig config);

  std::string name() const override { return config_.name; }
  std::string model() const override { return config_.model; }
  std::string complete(const std::string& prompt) override;

  const HttpProviderConfig& config() const { return config_; }

 private:
  void throttle();

  HttpProviderConfig config_;
  std::mutex throttle_mu_;
  std::chrono::steady_clock::time_point next_slot_{};
};

/// Replays completions stored as <dir>/<request_hash>.json
/// ({"completion": "..."}) or <dir>/<request_hash>.txt. A missing fixture is
/// a non-transient error.
class FixtureProvider : public CompletionProvider {
 public:
  FixtureProvider(std::string name, std::string model, std::filesystem::path dir);

  std::string name() const override { return name_; }
  std::string model() const override { return model_; }
  std::string complete(const std::string& prompt) override;

 private:
  std::string name_;
  std::string model_;
  std::filesystem::path dir_;
};

/// Forwards to an inner provider and records each successful completion as
/// a fixture that FixtureProvider can replay.
class RecordingProvider : public CompletionProvider {
 public:
  RecordingProvider(std::shared_ptr<CompletionProvider> inner, std::filesystem::path dir);

  std::string name() const override { return inner_->name(); }
  std::string model() const override { return inner_->model(); }
  std::string complete(const std::string& prompt) override;

 private:
  std::shared_ptr<CompletionProvider> inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
};

/// Wraps a callable; handy for embedding and tests.
class FunctionProvider : public CompletionProvider {
 public:
  using Fn = std::function<std::string(const std::string& prompt)>;

  FunctionProvider(std::string name, std::string model, Fn fn)
      : name_(std::move(name)), model_(std::move(model)), fn_(std::move(fn)) {}

  std::string name() const override { return name_; }
  std::string model() const override { return model_; }
  std::string complete(const std::string& prompt) override { return fn_(prompt); }

 private:
  std::string name_;
  std::string model_;
  Fn fn_;
};

/// Provider config file: {"providers": [{"name", "kind": "http"|"fixture", ...}]}.
/// Fixture entries take "model" and "fixture_dir" (relative to the file).
std::vector<std::shared_ptr<CompletionProvider>> load_providers(const std::filesystem::path& config);

// ---------------------------------------------------------------------------

struct RetryPolicy {
  int max_retries = 3;  // attempts = max_retries + 1
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};

  /// Delay before retry number `retry` (1-based): initial * multiplier^(retry-1), capped.
  std::chrono::milliseconds backoff(int retry) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Default sleeper: std::this_thread::sleep_for.
Sleeper real_sleeper();

struct AuditEntry {
  std::string request_hash;
  std::string provider;
  int attempt = 0;
  double latency_ms = 0.0;
  std::string outcome;  // "ok", "retry", "error"
  int status = 200;
  std::string detail;
};

void to_json(json& j, const AuditEntry& e);

/// Thread-safe audit trail. Entries are kept in memory and, when a path is
/// given, appended to a JSONL file as they arrive.
class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(std::filesystem::path path);

  void record(AuditEntry entry);
  std::vector<AuditEntry> entries() const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
};

/// Calls provider.complete with retries on transient failures. Every attempt
/// is audited. Throws the last ProviderError once retries are exhausted.
std::string complete_with_retry(CompletionProvider& provider, const std::string& prompt,
                                const RetryPolicy& policy, AuditLog* audit,
                                const Sleeper& sleep = real_sleeper());

}  // namespace feedrank
