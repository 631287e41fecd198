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

#include "feedrank/provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"

#include "feedrank/hash.hpp"
#include "feedrank/jsonl.hpp"

namespace feedrank {

bool is_transient_status(int status) { return status == 0 || status == 429 || status >= 500; }

std::string request_hash(const std::string& model, const std::string& prompt) {
  return content_hash128({model, prompt});
}

// ---------------------------------------------------------------------------

void from_json(const json& j, HttpProviderConfig& c) {
  c.name = j.at("name").get<std::string>();
  c.base_url = j.at("base_url").get<std::string>();
  c.path = j.value("path", c.path);
  c.model = j.at("model").get<std::string>();
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long long>(c.timeout.count())));
  c.requests_per_minute = j.value("requests_per_minute", 0.0);
  c.decoding = j.value("decoding", json::object());
}

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}

void HttpProvider::throttle() {
  if (config_.requests_per_minute <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / config_.requests_per_minute));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(throttle_mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string HttpProvider::complete(const std::string& prompt) {
  throttle();
  httplib::Client client(config_.base_url);
  const auto secs = config_.timeout.count() / 1000;
  const auto usecs = (config_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  json body = config_.decoding;
  body["model"] = config_.model;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});

  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError(0, true, config_.name + ": transport error: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ProviderError(res->status, is_transient_status(res->status),
                        config_.name + ": HTTP " + std::to_string(res->status) + ": " +
                            res->body.substr(0, 200));
  }
  try {
    const json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(res->status, false, config_.name + ": unexpected response shape: " + e.what());
  }
}

// ---------------------------------------------------------------------------

FixtureProvider::FixtureProvider(std::string name, std::string model, std::filesystem::path dir)
    : name_(std::move(name)), model_(std::move(model)), dir_(std::move(dir)) {}

std::string FixtureProvider::complete(const std::string& prompt) {
  const std::string key = request_hash(model_, prompt);
  if (const auto js = dir_ / (key + ".json"); std::filesystem::exists(js)) {
    return load_json_file(js).at("completion").get<std::string>();
  }
  if (const auto txt = dir_ / (key + ".txt"); std::filesystem::exists(txt)) {
    return read_text_file(txt);
  }
  throw ProviderError(404, false, name_ + ": no fixture for request " + key + " in " + dir_.string());
}

RecordingProvider::RecordingProvider(std::shared_ptr<CompletionProvider> inner,
                                     std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {}

std::string RecordingProvider::complete(const std::string& prompt) {
  std::string completion = inner_->complete(prompt);
  const std::string key = request_hash(inner_->model(), prompt);
  std::lock_guard lock(mu_);
  write_json_file(dir_ / (key + ".json"),
                  json{{"completion", completion}, {"model", inner_->model()}, {"provider", inner_->name()}});
  return completion;
}

std::vector<std::shared_ptr<CompletionProvider>> load_providers(const std::filesystem::path& config) {
  const json doc = load_json_file(config);
  std::vector<std::shared_ptr<CompletionProvider>> out;
  for (const auto& entry : doc.at("providers")) {
    const std::string kind = entry.value("kind", "http");
    if (kind == "http") {
      out.push_back(std::make_shared<HttpProvider>(entry.get<HttpProviderConfig>()));
    } else if (kind == "fixture") {
      std::filesystem::path dir = entry.at("fixture_dir").get<std::string>();
      if (dir.is_relative()) dir = config.parent_path() / dir;
      out.push_back(std::make_shared<FixtureProvider>(entry.at("name").get<std::string>(),
                                                      entry.at("model").get<std::string>(), dir));
    } else {
      throw ValidationError("kind", "invalid field kind: unknown provider kind '" + kind + "'");
    }
  }
  if (out.empty()) throw ValidationError("providers", "invalid field providers: no providers configured");
  return out;
}

// ---------------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::backoff(int retry) const {
  const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry - 1);
  return std::chrono::milliseconds(
      static_cast<long long>(std::min(ms, static_cast<double>(max_backoff.count()))));
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void to_json(json& j, const AuditEntry& e) {
  j = json{{"request_hash", e.request_hash}, {"provider", e.provider}, {"attempt", e.attempt},
           {"latency_ms", e.latency_ms},     {"outcome", e.outcome},   {"status", e.status}};
  if (!e.detail.empty()) j["detail"] = e.detail;
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
}

void AuditLog::record(AuditEntry entry) {
  std::lock_guard lock(mu_);
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    out << json(entry).dump() << '\n';
  }
  entries_.push_back(std::move(entry));
}

std::vector<AuditEntry> AuditLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::string complete_with_retry(CompletionProvider& provider, const std::string& prompt,
                                const RetryPolicy& policy, AuditLog* audit, const Sleeper& sleep) {
  const std::string key = request_hash(provider.model(), prompt);
  for (int attempt = 1;; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    };
    try {
      std::string text = provider.complete(prompt);
      if (audit) audit->record({key, provider.name(), attempt, elapsed_ms(), "ok", 200, {}});
      return text;
    } catch (const ProviderError& e) {
      const bool retry = e.transient() && attempt <= policy.max_retries;
      if (audit) {
        audit->record({key, provider.name(), attempt, elapsed_ms(), retry ? "retry" : "error",
                       e.status(), e.what()});
      }
      if (!retry) throw;
      sleep(policy.backoff(attempt));
    }
  }
}

}  // namespace feedrank
