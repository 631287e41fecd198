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

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "feedrank/error.hpp"
#include "feedrank/types.hpp"

namespace feedrank {

inline constexpr std::size_t kAnnotationCards = 5;

enum class TaskStatus { Pending, Assigned, Completed };
std::string_view task_status_name(TaskStatus s);

struct AnnotationTask {
  std::string task_id;
  TutoringPrompt prompt;
  std::vector<FeedbackCandidate> candidates;  // input order, never sent to clients
  TaskStatus status = TaskStatus::Pending;
  std::optional<std::string> assigned_to;
};

/// Task input line: {"task_id"?, "prompt", "candidates"} with exactly five
/// candidates. A RankedCandidateSet line is accepted too (its ranking is
/// ignored). The task id defaults to the prompt id.
AnnotationTask task_from_json(const json& j);

struct CandidateMark {
  bool correct = false;
  bool revealing = false;
};

/// Tier of a mark: 0 both criteria, 1 correct only, 2 revealing only,
/// 3 neither. Lower tiers must rank higher.
int tier(const CandidateMark& m);
std::string_view tier_name(int tier);

struct AnnotationResult {
  std::string task_id;
  std::string annotator;
  std::vector<CandidateMark> marks;  // per card
  std::vector<std::size_t> ranking;  // card indices, best first
  std::string submitted_at;          // ISO-8601 UTC
};

struct TierViolation {
  std::size_t higher_card = 0;  // ranked above but in a worse tier
  std::size_t lower_card = 0;
};

/// First pair of cards whose order contradicts their tiers, scanning the
/// ranking top-down.
std::optional<TierViolation> find_tier_violation(const std::vector<CandidateMark>& marks,
                                                 const std::vector<std::size_t>& ranking);

class TierOrderError : public Error {
 public:
  TierOrderError(TierViolation v, const std::string& message) : Error("tier_order_violation", message), violation_(v) {}
  const TierViolation& violation() const noexcept { return violation_; }

 private:
  TierViolation violation_;
};

class ForbiddenError : public Error {
 public:
  explicit ForbiddenError(const std::string& message) : Error("forbidden", message) {}
};

/// Card k of a task shows candidate perm[k]. Seeded from the task id.
std::vector<std::size_t> blinding_permutation(const std::string& task_id);

/// Task queue backed by an append-only journal.
///
/// `data_dir` holds tasks.jsonl (the input queue) and journal.jsonl (assign
/// and submit events), which is replayed on construction. Assignment and
/// submission take an exclusive lock; reads share it.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path data_dir);

  /// Blinded view of the annotator's current task, assigning the next
  /// pending one if needed. nullopt when no task is available.
  std::optional<json> next_task(const std::string& annotator);

  /// Validates and records a ranking; returns the un-blinded set.
  RankedCandidateSet submit(const std::string& task_id, const std::string& annotator,
                            const std::vector<CandidateMark>& marks, const std::vector<std::size_t>& ranking);

  std::vector<RankedCandidateSet> export_ranked() const;
  json progress() const;
  std::size_t size() const;

 private:
  void apply_assign(const std::string& task_id, const std::string& annotator);
  RankedCandidateSet apply_submit(const AnnotationResult& result);
  void append(const json& event);
  json blinded_view(const AnnotationTask& task) const;
  AnnotationTask& find(const std::string& task_id);

  std::filesystem::path dir_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, RankedCandidateSet> completed_;
  std::map<std::string, AnnotationResult> results_;
  std::ofstream journal_;
  mutable std::shared_mutex mu_;
};

/// Blinded task JSON for clients: prompt fields and cards carrying only
/// their index and text.
json blinded_task_json(const AnnotationTask& task);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;
};

/// HTTP front end for an AnnotationStore.
class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, ServerOptions options);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds the socket; returns the bound port.
  int bind();
  /// Serves until stop(); call after bind().
  void serve();
  /// bind() then serve() on a background thread.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace feedrank
