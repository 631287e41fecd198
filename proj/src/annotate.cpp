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

#include "feedrank/annotate.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <mutex>
#include <set>
#include <thread>

#include "httplib.h"

#include "feedrank/hash.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/rng.hpp"

namespace feedrank {
namespace {

constexpr std::uint64_t kBlindingSalt = 0x626c696e64ULL;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json marks_json(const std::vector<CandidateMark>& marks) {
  json out = json::array();
  for (const auto& m : marks) out.push_back({{"correct", m.correct}, {"revealing", m.revealing}});
  return out;
}

std::vector<CandidateMark> marks_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("marks", "invalid field marks: expected an array");
  std::vector<CandidateMark> out;
  for (const auto& m : j) {
    if (!m.is_object() || !m.contains("correct") || !m.contains("revealing") || !m["correct"].is_boolean() ||
        !m["revealing"].is_boolean()) {
      throw ValidationError("marks", "invalid field marks: each mark needs boolean correct and revealing");
    }
    out.push_back({m["correct"].get<bool>(), m["revealing"].get<bool>()});
  }
  return out;
}

std::vector<std::size_t> ranking_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("ranking", "invalid field ranking: expected an array");
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    if (!v.is_number_unsigned()) throw ValidationError("ranking", "invalid field ranking: expected card indices");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

std::string describe(std::size_t card, const CandidateMark& m) {
  return "card " + std::to_string(card) + " (" + std::string(tier_name(tier(m))) + ")";
}

}  // namespace

std::string_view task_status_name(TaskStatus s) {
  switch (s) {
    case TaskStatus::Pending: return "pending";
    case TaskStatus::Assigned: return "assigned";
    case TaskStatus::Completed: return "completed";
  }
  return "pending";
}

AnnotationTask task_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("task", "task must be a JSON object");
  if (!j.contains("prompt")) throw ValidationError("prompt", "missing field prompt");
  if (!j.contains("candidates")) throw ValidationError("candidates", "missing field candidates");
  AnnotationTask t;
  t.prompt = j["prompt"].get<TutoringPrompt>();
  t.candidates = j["candidates"].get<std::vector<FeedbackCandidate>>();
  if (t.candidates.size() != kAnnotationCards) {
    throw ValidationError("candidates", "invalid field candidates: a task needs exactly 5 candidates, got " +
                                            std::to_string(t.candidates.size()));
  }
  std::set<std::string> texts;
  for (const auto& c : t.candidates) {
    if (!texts.insert(c.text).second) throw ValidationError("candidates", "invalid field candidates: duplicate text");
  }
  t.task_id = j.contains("task_id") ? j["task_id"].get<std::string>() : t.prompt.id;
  if (trim(t.task_id).empty()) throw ValidationError("task_id", "invalid field task_id: must be non-empty");
  return t;
}

int tier(const CandidateMark& m) {
  if (m.correct && m.revealing) return 0;
  if (m.correct) return 1;
  if (m.revealing) return 2;
  return 3;
}

std::string_view tier_name(int t) {
  switch (t) {
    case 0: return "correct and revealing";
    case 1: return "correct only";
    case 2: return "revealing only";
    default: return "neither";
  }
}

std::optional<TierViolation> find_tier_violation(const std::vector<CandidateMark>& marks,
                                                 const std::vector<std::size_t>& ranking) {
  for (std::size_t a = 0; a < ranking.size(); ++a) {
    for (std::size_t b = a + 1; b < ranking.size(); ++b) {
      if (tier(marks.at(ranking[a])) > tier(marks.at(ranking[b]))) return TierViolation{ranking[a], ranking[b]};
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> blinding_permutation(const std::string& task_id) {
  std::vector<std::size_t> perm(kAnnotationCards);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(fast_hash64(task_id, kBlindingSalt));
  rng.shuffle(std::span<std::size_t>(perm));
  return perm;
}

json blinded_task_json(const AnnotationTask& task) {
  const auto perm = blinding_permutation(task.task_id);
  json dialogue = json::array();
  for (const auto& turn : task.prompt.dialogue) dialogue.push_back(turn);
  json cards = json::array();
  for (std::size_t k = 0; k < perm.size(); ++k) cards.push_back({{"card", k}, {"text", task.candidates[perm[k]].text}});
  return json{{"task_id", task.task_id},
              {"prompt",
               {{"context", task.prompt.context},
                {"dialogue", dialogue},
                {"question", task.prompt.question},
                {"student_answer", task.prompt.student_answer},
                {"correct_answer", task.prompt.correct_answer}}},
              {"candidates", cards}};
}

// ---------------------------------------------------------------------------

AnnotationStore::AnnotationStore(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
  std::filesystem::create_directories(dir_);
  const auto tasks_path = dir_ / "tasks.jsonl";
  if (std::filesystem::exists(tasks_path)) {
    for (const auto& row : load_jsonl<json>(tasks_path)) {
      AnnotationTask t = task_from_json(row);
      if (index_.contains(t.task_id)) throw ValidationError("task_id", "duplicate task id " + t.task_id);
      index_[t.task_id] = tasks_.size();
      tasks_.push_back(std::move(t));
    }
  }

  const auto journal_path = dir_ / "journal.jsonl";
  if (std::filesystem::exists(journal_path)) {
    std::ifstream in(journal_path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      json event;
      try {
        event = json::parse(lines[i]);
      } catch (const json::parse_error& e) {
        // A torn final line is what an interrupted append leaves behind.
        if (i + 1 == lines.size()) break;
        throw ParseError(i + 1, std::string("journal: ") + e.what());
      }
      const std::string kind = event.at("event").get<std::string>();
      if (kind == "assign") {
        apply_assign(event.at("task_id").get<std::string>(), event.at("annotator").get<std::string>());
      } else if (kind == "submit") {
        AnnotationResult r;
        r.task_id = event.at("task_id").get<std::string>();
        r.annotator = event.at("annotator").get<std::string>();
        r.marks = marks_from_json(event.at("marks"));
        r.ranking = ranking_from_json(event.at("ranking"));
        r.submitted_at = event.value("submitted_at", std::string());
        apply_submit(r);
      } else {
        throw ParseError(i + 1, "journal: unknown event '" + kind + "'");
      }
    }
  }
  journal_.open(journal_path, std::ios::app);
  if (!journal_) throw Error("io", "cannot open journal " + journal_path.string());
}

AnnotationTask& AnnotationStore::find(const std::string& task_id) {
  const auto it = index_.find(task_id);
  if (it == index_.end()) throw NotFoundError("unknown task " + task_id);
  return tasks_[it->second];
}

void AnnotationStore::append(const json& event) {
  journal_ << event.dump() << '\n';
  journal_.flush();
  if (!journal_) throw Error("io", "journal write failed");
}

void AnnotationStore::apply_assign(const std::string& task_id, const std::string& annotator) {
  AnnotationTask& t = find(task_id);
  t.status = TaskStatus::Assigned;
  t.assigned_to = annotator;
}

RankedCandidateSet AnnotationStore::apply_submit(const AnnotationResult& r) {
  AnnotationTask& t = find(r.task_id);
  const auto perm = blinding_permutation(t.task_id);
  RankedCandidateSet set;
  set.prompt = t.prompt;
  set.candidates = t.candidates;
  set.rank_source = RankSource::HumanAnnotation;
  std::vector<CandidateMark> by_candidate(kAnnotationCards);
  for (std::size_t k = 0; k < kAnnotationCards; ++k) by_candidate[perm[k]] = r.marks.at(k);
  for (auto card : r.ranking) set.ranking.push_back(perm.at(card));
  set.extra = json{{"annotation",
                    {{"task_id", r.task_id},
                     {"annotator", r.annotator},
                     {"submitted_at", r.submitted_at},
                     {"marks", marks_json(by_candidate)}}}};
  validate(set);
  t.status = TaskStatus::Completed;
  completed_[t.task_id] = set;
  results_[t.task_id] = r;
  return set;
}

json AnnotationStore::blinded_view(const AnnotationTask& task) const { return blinded_task_json(task); }

std::optional<json> AnnotationStore::next_task(const std::string& annotator) {
  if (trim(annotator).empty()) throw ValidationError("annotator", "annotator id must be non-empty");
  std::unique_lock lock(mu_);
  for (const auto& t : tasks_) {
    if (t.status == TaskStatus::Assigned && t.assigned_to == annotator) return blinded_view(t);
  }
  for (auto& t : tasks_) {
    if (t.status != TaskStatus::Pending) continue;
    append(json{{"event", "assign"}, {"task_id", t.task_id}, {"annotator", annotator}});
    apply_assign(t.task_id, annotator);
    return blinded_view(t);
  }
  return std::nullopt;
}

RankedCandidateSet AnnotationStore::submit(const std::string& task_id, const std::string& annotator,
                                           const std::vector<CandidateMark>& marks,
                                           const std::vector<std::size_t>& ranking) {
  std::unique_lock lock(mu_);
  AnnotationTask& t = find(task_id);
  if (t.status == TaskStatus::Completed) throw ConflictError("task " + task_id + " is already completed");
  if (t.status != TaskStatus::Assigned || t.assigned_to != annotator) {
    throw ForbiddenError("task " + task_id + " is not assigned to " + annotator);
  }
  if (marks.size() != kAnnotationCards) {
    throw ValidationError("marks", "invalid field marks: expected 5 marks, got " + std::to_string(marks.size()));
  }
  check_permutation(ranking, kAnnotationCards);
  if (const auto v = find_tier_violation(marks, ranking)) {
    throw TierOrderError(*v, describe(v->higher_card, marks[v->higher_card]) + " is ranked above " +
                                 describe(v->lower_card, marks[v->lower_card]) +
                                 "; candidates meeting both criteria rank first, then correct only, then "
                                 "revealing only, then neither");
  }
  AnnotationResult r{task_id, annotator, marks, ranking, utc_now()};
  append(json{{"event", "submit"},
              {"task_id", r.task_id},
              {"annotator", r.annotator},
              {"marks", marks_json(r.marks)},
              {"ranking", r.ranking},
              {"submitted_at", r.submitted_at}});
  return apply_submit(r);
}

std::vector<RankedCandidateSet> AnnotationStore::export_ranked() const {
  std::shared_lock lock(mu_);
  std::vector<RankedCandidateSet> out;
  for (const auto& t : tasks_) {
    const auto it = completed_.find(t.task_id);
    if (it == completed_.end()) continue;
    const AnnotationResult& r = results_.at(t.task_id);
    if (find_tier_violation(r.marks, r.ranking)) {
      throw Error("integrity", "stored ranking for task " + t.task_id + " violates the tier order");
    }
    out.push_back(it->second);
  }
  return out;
}

json AnnotationStore::progress() const {
  std::shared_lock lock(mu_);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& t : tasks_) ++counts[static_cast<int>(t.status)];
  return json{{"total", tasks_.size()}, {"pending", counts[0]}, {"assigned", counts[1]}, {"completed", counts[2]}};
}

std::size_t AnnotationStore::size() const {
  std::shared_lock lock(mu_);
  return tasks_.size();
}

// ---------------------------------------------------------------------------

struct AnnotationServer::Impl {
  AnnotationStore& store;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  Impl(AnnotationStore& s, ServerOptions o) : store(s), options(std::move(o)) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                json extra = json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

template <class Fn>
void guarded(httplib::Response& res, Fn fn) {
  try {
    fn();
  } catch (const TierOrderError& e) {
    send_error(res, 422, e.code(), e.what(),
               json{{"cards", {e.violation().higher_card, e.violation().lower_card}}});
  } catch (const ValidationError& e) {
    send_error(res, 400, "bad_request", e.what(), json{{"field", e.field()}});
  } catch (const json::exception& e) {
    send_error(res, 400, "bad_request", e.what());
  } catch (const ForbiddenError& e) {
    send_error(res, 403, e.code(), e.what());
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.code(), e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, e.code(), e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

std::string annotator_of(const httplib::Request& req, const json* body = nullptr) {
  std::string id = req.get_header_value("X-Annotator-Id");
  if (id.empty() && body && body->contains("annotator_id")) id = (*body)["annotator_id"].get<std::string>();
  if (trim(id).empty()) throw ValidationError("annotator", "missing X-Annotator-Id header");
  return id;
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  auto& svr = impl_->server;
  AnnotationStore* st = &store;

  svr.Get("/api/tasks/next", [st](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto task = st->next_task(annotator_of(req));
      if (task) {
        send_json(res, 200, json{{"status", "assigned"}, {"task", *task}});
      } else {
        send_json(res, 200, json{{"status", "no_tasks"}});
      }
    });
  });

  svr.Post("/api/tasks/:id/ranking", [st](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      if (!body.is_object()) throw ValidationError("body", "request body must be a JSON object");
      if (!body.contains("marks")) throw ValidationError("marks", "missing field marks");
      if (!body.contains("ranking")) throw ValidationError("ranking", "missing field ranking");
      const std::string task_id = req.path_params.at("id");
      st->submit(task_id, annotator_of(req, &body), marks_from_json(body["marks"]), ranking_from_json(body["ranking"]));
      send_json(res, 200, json{{"status", "accepted"}, {"task_id", task_id}});
    });
  });

  svr.Get("/api/export", [st](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string format = req.has_param("format") ? req.get_param_value("format") : "jsonl";
      const auto sets = st->export_ranked();
      if (format == "jsonl") {
        res.set_header("X-Record-Count", std::to_string(sets.size()));
        res.set_content(to_jsonl(sets), "application/x-ndjson");
      } else if (format == "json") {
        send_json(res, 200,
                  json{{"manifest", {{"count", sets.size()}, {"rank_source", "human_annotation"}}},
                       {"records", sets}});
      } else {
        throw ValidationError("format", "invalid field format: expected jsonl or json");
      }
    });
  });

  svr.Get("/api/progress", [st](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, st->progress()); });
  });

  if (impl_->options.static_dir) {
    if (!svr.set_mount_point("/", impl_->options.static_dir->string())) {
      throw NotFoundError("static directory not found: " + impl_->options.static_dir->string());
    }
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind() {
  auto& o = impl_->options;
  impl_->port = o.port == 0 ? impl_->server.bind_to_any_port(o.host) : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
  if (impl_->port < 0) throw Error("io", "cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void AnnotationServer::serve() { impl_->server.listen_after_bind(); }

int AnnotationServer::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
  return port;
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace feedrank
