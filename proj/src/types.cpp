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

#include "feedrank/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "feedrank/error.hpp"
#include "feedrank/hash.hpp"

namespace feedrank {
namespace {

[[noreturn]] void missing(const std::string& field) {
  throw ValidationError(field, "missing field " + field);
}

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw ValidationError(field, "invalid field " + field + ": " + why);
}

/// Re-raises a nested validation error with its field path prefixed.
template <class Fn>
void nested(const std::string& prefix, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    const std::string path = prefix + "." + e.field();
    std::string message = e.what();
    const std::string needle = "field " + e.field();
    if (auto pos = message.find(needle); pos != std::string::npos) {
      message.replace(pos, needle.size(), "field " + path);
    }
    throw ValidationError(path, message);
  }
}

const json& require(const json& j, const std::string& field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) missing(field);
  return *it;
}

std::string require_string(const json& j, const std::string& field) {
  const json& v = require(j, field);
  if (!v.is_string()) invalid(field, "expected a string");
  return v.get<std::string>();
}

json collect_extra(const json& j, std::initializer_list<std::string_view> known) {
  json extra = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) extra[it.key()] = it.value();
  }
  return extra;
}

json with_extra(const json& extra) {
  json j = json::object();
  if (extra.is_object()) j.update(extra);
  return j;
}

void require_object(const json& j) {
  if (!j.is_object()) throw ValidationError("record", "invalid field record: expected a JSON object");
}

constexpr std::array<std::string_view, kCriterionCount> kCriterionNames = {
    "Correct", "Revealing", "Guidance", "Diagnostic", "Encouragement"};

constexpr std::array<std::string_view, kCriterionCount> kCriterionDefinitions = {
    "The feedback should be factually accurate and directly related to the student's response "
    "and the question.",
    "The feedback should avoid explicitly providing the correct answer to the student.",
    "The feedback should offer direction or hints to help the student progress towards the "
    "right answer.",
    "The feedback should pinpoint and address any misconceptions or errors made by the student.",
    "The feedback should convey a positive and supportive tone to motivate the student.",
};

constexpr std::array<std::string_view, 7> kSourceNames = {
    "human", "direct", "preptutor", "gpt35", "gpt4", "llm_with_criteria", "llm_without_criteria"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// ---------------------------------------------------------------------------

void validate(const TutoringPrompt& p) {
  if (trim(p.id).empty()) invalid("id", "must be non-empty");
  if (trim(p.student_answer) == trim(p.correct_answer)) {
    invalid("student_answer", "must differ from correct_answer");
  }
  for (auto it = p.dialogue.rbegin(); it != p.dialogue.rend(); ++it) {
    if (it->speaker != Speaker::Student) continue;
    if (trim(it->utterance) != trim(p.student_answer)) {
      invalid("dialogue", "last student utterance must equal student_answer");
    }
    break;
  }
}

// ---------------------------------------------------------------------------

std::string_view criterion_name(Criterion c) { return kCriterionNames[static_cast<std::size_t>(c)]; }

std::string_view criterion_definition(Criterion c) {
  return kCriterionDefinitions[static_cast<std::size_t>(c)];
}

Criterion criterion_from_name(std::string_view name) {
  const std::string key = lower(trim(name));
  for (std::size_t i = 0; i < kCriterionCount; ++i) {
    if (lower(kCriterionNames[i]) == key) return static_cast<Criterion>(i);
  }
  invalid("criteria", "unknown criterion '" + std::string(name) + "'");
}

CriterionSet::CriterionSet(std::initializer_list<Criterion> members) {
  for (auto c : members) insert(c);
}

CriterionSet CriterionSet::all() {
  return {Criterion::Correct, Criterion::Revealing, Criterion::Guidance, Criterion::Diagnostic,
          Criterion::Encouragement};
}

CriterionSet CriterionSet::essential() { return {Criterion::Correct, Criterion::Revealing}; }

CriterionSet CriterionSet::from_names(const std::vector<std::string>& names) {
  CriterionSet set;
  for (const auto& n : names) {
    const Criterion c = criterion_from_name(n);
    if (set.contains(c)) invalid("criteria", "duplicate criterion '" + n + "'");
    set.insert(c);
  }
  if (set.empty()) invalid("criteria", "must be non-empty");
  return set;
}

CriterionSet CriterionSet::parse(std::string_view spec) {
  if (lower(trim(spec)) == "all") return all();
  std::vector<std::string> names;
  std::stringstream ss{std::string(spec)};
  for (std::string item; std::getline(ss, item, ',');) {
    if (!trim(item).empty()) names.push_back(trim(item));
  }
  return from_names(names);
}

std::size_t CriterionSet::size() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kCriterionCount; ++i) n += contains(static_cast<Criterion>(i));
  return n;
}

std::vector<Criterion> CriterionSet::members() const {
  std::vector<Criterion> out;
  for (std::size_t i = 0; i < kCriterionCount; ++i) {
    if (contains(static_cast<Criterion>(i))) out.push_back(static_cast<Criterion>(i));
  }
  return out;
}

std::vector<std::string> CriterionSet::names() const {
  std::vector<std::string> out;
  for (auto c : members()) out.emplace_back(criterion_name(c));
  return out;
}

// ---------------------------------------------------------------------------

std::string_view source_name(FeedbackSource s) {
  if (s == FeedbackSource::Other) return "other";
  return kSourceNames[static_cast<std::size_t>(s)];
}

FeedbackSource source_from_label(std::string_view label) {
  for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
    if (kSourceNames[i] == label) return static_cast<FeedbackSource>(i);
  }
  return FeedbackSource::Other;
}

std::string FeedbackCandidate::source_label() const {
  if (source == FeedbackSource::Other) return other_label.empty() ? "other" : other_label;
  return std::string(source_name(source));
}

void validate(const FeedbackCandidate& c) {
  if (trim(c.text).empty()) invalid("text", "must be non-empty");
  const bool with_criteria = c.source == FeedbackSource::LlmWithCriteria;
  if (with_criteria && !c.criteria_used) invalid("criteria_used", "required for llm_with_criteria");
  if (!with_criteria && c.criteria_used) {
    invalid("criteria_used", "only allowed for llm_with_criteria");
  }
  if (c.criteria_used && c.criteria_used->empty()) invalid("criteria_used", "must be non-empty");
  if (c.source == FeedbackSource::Other && source_from_label(c.other_label) != FeedbackSource::Other) {
    invalid("source", "other label collides with a known source");
  }
}

std::string_view rank_source_name(RankSource s) {
  switch (s) {
    case RankSource::HumanAnnotation: return "human_annotation";
    case RankSource::ModelPrediction: return "model_prediction";
    case RankSource::GroundTruthImport: return "ground_truth_import";
  }
  return "ground_truth_import";
}

void check_permutation(const std::vector<std::size_t>& ranking, std::size_t n) {
  if (ranking.size() != n) {
    invalid("ranking", "expected " + std::to_string(n) + " entries, got " +
                           std::to_string(ranking.size()));
  }
  std::vector<bool> seen(n, false);
  for (auto idx : ranking) {
    if (idx >= n) invalid("ranking", "index " + std::to_string(idx) + " out of range");
    if (seen[idx]) invalid("ranking", "duplicate index " + std::to_string(idx));
    seen[idx] = true;
  }
}

void validate(const RankedCandidateSet& s) {
  nested("prompt", [&] { validate(s.prompt); });
  if (s.candidates.size() < 2) invalid("candidates", "need at least 2 candidates");
  if (s.rank_source == RankSource::GroundTruthImport &&
      s.candidates.size() != kImportedCandidateCount) {
    invalid("candidates", "imported ranked sets must have exactly " +
                              std::to_string(kImportedCandidateCount) + " candidates");
  }
  for (std::size_t i = 0; i < s.candidates.size(); ++i) {
    nested("candidates[" + std::to_string(i) + "]", [&] { validate(s.candidates[i]); });
  }
  check_permutation(s.ranking, s.candidates.size());
}

// ---------------------------------------------------------------------------

std::string_view origin_name(PairOrigin o) {
  switch (o) {
    case PairOrigin::DmRanked: return "dm_ranked";
    case PairOrigin::DgCriteria: return "dg_criteria";
    case PairOrigin::CrossContext: return "cross_context";
  }
  return "dm_ranked";
}

std::string compute_pair_id(std::string_view prompt_id, std::string_view chosen_text,
                            std::string_view rejected_text) {
  return content_hash128({prompt_id, chosen_text, rejected_text});
}

PreferencePair make_preference_pair(TutoringPrompt prompt, FeedbackCandidate chosen,
                                    FeedbackCandidate rejected, PairOrigin origin,
                                    std::optional<std::string> rejected_prompt_id) {
  PreferencePair p;
  p.pair_id = compute_pair_id(prompt.id, chosen.text, rejected.text);
  p.prompt = std::move(prompt);
  p.chosen = std::move(chosen);
  p.rejected = std::move(rejected);
  p.origin = origin;
  p.rejected_prompt_id = std::move(rejected_prompt_id);
  validate(p);
  return p;
}

void validate(const PreferencePair& p) {
  nested("prompt", [&] { validate(p.prompt); });
  nested("chosen", [&] { validate(p.chosen); });
  nested("rejected", [&] { validate(p.rejected); });
  const bool cross = p.origin == PairOrigin::CrossContext;
  if (cross) {
    if (!p.rejected_prompt_id || *p.rejected_prompt_id == p.prompt.id) {
      invalid("rejected_prompt_id", "cross-context pairs need a distinct source prompt");
    }
  } else {
    if (p.rejected_prompt_id) invalid("rejected_prompt_id", "only allowed for cross_context pairs");
    if (p.chosen.text == p.rejected.text) invalid("rejected", "chosen and rejected texts are identical");
  }
  if (p.pair_id != compute_pair_id(p.prompt.id, p.chosen.text, p.rejected.text)) {
    invalid("pair_id", "does not match the content hash of (prompt.id, chosen, rejected)");
  }
}

// ---------------------------------------------------------------------------

DatasetName DatasetName::parse(std::string_view text) {
  const std::string t = trim(text);
  if (t == "DM") return dm();
  if (t == "DG") return dg();
  if (t.size() > 4 && t.rfind("DA(", 0) == 0 && t.back() == ')') {
    const std::string num = t.substr(3, t.size() - 4);
    try {
      std::size_t used = 0;
      const double r = std::stod(num, &used);
      if (used == num.size()) return da(r);
    } catch (const std::exception&) {
    }
  }
  invalid("name", "expected DM, DG or DA(<ratio>), got '" + t + "'");
}

std::string DatasetName::str() const {
  switch (kind) {
    case Kind::DM: return "DM";
    case Kind::DG: return "DG";
    case Kind::DA: {
      std::ostringstream os;
      os << "DA(" << ratio << ")";
      return os.str();
    }
  }
  return "DM";
}

std::vector<std::string> leaked_prompt_ids(const DatasetSplit& split) {
  std::set<std::string> train_ids;
  for (const auto& p : split.train) train_ids.insert(p.prompt.id);
  std::set<std::string> leaked;
  for (const auto& p : split.test) {
    if (train_ids.count(p.prompt.id)) leaked.insert(p.prompt.id);
  }
  return {leaked.begin(), leaked.end()};
}

void validate(const DatasetSplit& split) {
  if (split.name.kind == DatasetName::Kind::DA &&
      !(split.name.ratio >= 0.0 && split.name.ratio <= 1.0)) {
    invalid("name", "DA ratio must lie in [0, 1]");
  }
  const auto leaked = leaked_prompt_ids(split);
  if (!leaked.empty()) {
    invalid("test", std::to_string(leaked.size()) + " prompt id(s) appear in both train and test, first: " +
                        leaked.front());
  }
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const Turn& t) {
  j = json{{"speaker", t.speaker == Speaker::Teacher ? "teacher" : "student"},
           {"utterance", t.utterance}};
}

void from_json(const json& j, Turn& t) {
  require_object(j);
  const std::string speaker = require_string(j, "speaker");
  if (speaker == "teacher") {
    t.speaker = Speaker::Teacher;
  } else if (speaker == "student") {
    t.speaker = Speaker::Student;
  } else {
    invalid("speaker", "expected teacher or student");
  }
  t.utterance = require_string(j, "utterance");
}

void to_json(json& j, const TutoringPrompt& p) {
  j = with_extra(p.extra);
  j["id"] = p.id;
  j["context"] = p.context;
  j["dialogue"] = p.dialogue;
  j["question"] = p.question;
  j["student_answer"] = p.student_answer;
  j["correct_answer"] = p.correct_answer;
}

void from_json(const json& j, TutoringPrompt& p) {
  require_object(j);
  p.id = require_string(j, "id");
  p.context = require_string(j, "context");
  p.dialogue.clear();
  if (auto it = j.find("dialogue"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) invalid("dialogue", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      Turn t;
      nested("dialogue[" + std::to_string(i) + "]", [&] { from_json((*it)[i], t); });
      p.dialogue.push_back(std::move(t));
    }
  }
  p.question = require_string(j, "question");
  p.student_answer = require_string(j, "student_answer");
  p.correct_answer = require_string(j, "correct_answer");
  p.extra = collect_extra(
      j, {"id", "context", "dialogue", "question", "student_answer", "correct_answer"});
  validate(p);
}

void to_json(json& j, const CriterionSet& c) { j = c.names(); }

void from_json(const json& j, CriterionSet& c) {
  if (!j.is_array()) invalid("criteria", "expected an array of criterion names");
  std::vector<std::string> names;
  for (const auto& v : j) {
    if (!v.is_string()) invalid("criteria", "expected criterion names");
    names.push_back(v.get<std::string>());
  }
  c = CriterionSet::from_names(names);
}

void to_json(json& j, const FeedbackCandidate& c) {
  j = with_extra(c.extra);
  j["text"] = c.text;
  j["source"] = c.source_label();
  if (c.provider) j["provider"] = *c.provider;
  if (c.criteria_used) j["criteria_used"] = *c.criteria_used;
}

void from_json(const json& j, FeedbackCandidate& c) {
  require_object(j);
  c.text = require_string(j, "text");
  const std::string label = require_string(j, "source");
  c.source = source_from_label(label);
  c.other_label = c.source == FeedbackSource::Other ? label : std::string();
  c.provider.reset();
  if (auto it = j.find("provider"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) invalid("provider", "expected a string");
    c.provider = it->get<std::string>();
  }
  c.criteria_used.reset();
  if (auto it = j.find("criteria_used"); it != j.end() && !it->is_null()) {
    CriterionSet set;
    from_json(*it, set);
    c.criteria_used = set;
  }
  c.extra = collect_extra(j, {"text", "source", "provider", "criteria_used"});
  validate(c);
}

void to_json(json& j, const RankedCandidateSet& s) {
  j = with_extra(s.extra);
  j["prompt"] = s.prompt;
  j["candidates"] = s.candidates;
  j["ranking"] = s.ranking;
  j["rank_source"] = rank_source_name(s.rank_source);
}

void from_json(const json& j, RankedCandidateSet& s) {
  require_object(j);
  nested("prompt", [&] { from_json(require(j, "prompt"), s.prompt); });
  const json& cands = require(j, "candidates");
  if (!cands.is_array()) invalid("candidates", "expected an array");
  s.candidates.clear();
  for (std::size_t i = 0; i < cands.size(); ++i) {
    FeedbackCandidate c;
    nested("candidates[" + std::to_string(i) + "]", [&] { from_json(cands[i], c); });
    s.candidates.push_back(std::move(c));
  }
  const json& ranking = require(j, "ranking");
  if (!ranking.is_array()) invalid("ranking", "expected an array");
  s.ranking.clear();
  for (const auto& v : ranking) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      invalid("ranking", "expected non-negative integers");
    }
    s.ranking.push_back(v.get<std::size_t>());
  }
  const std::string source = require_string(j, "rank_source");
  if (source == "human_annotation") {
    s.rank_source = RankSource::HumanAnnotation;
  } else if (source == "model_prediction") {
    s.rank_source = RankSource::ModelPrediction;
  } else if (source == "ground_truth_import") {
    s.rank_source = RankSource::GroundTruthImport;
  } else {
    invalid("rank_source", "unknown value '" + source + "'");
  }
  s.extra = collect_extra(j, {"prompt", "candidates", "ranking", "rank_source"});
  validate(s);
}

void to_json(json& j, const PreferencePair& p) {
  j = with_extra(p.extra);
  j["prompt"] = p.prompt;
  j["chosen"] = p.chosen;
  j["rejected"] = p.rejected;
  j["origin"] = origin_name(p.origin);
  j["pair_id"] = p.pair_id;
  if (p.rejected_prompt_id) j["rejected_prompt_id"] = *p.rejected_prompt_id;
}

void from_json(const json& j, PreferencePair& p) {
  require_object(j);
  nested("prompt", [&] { from_json(require(j, "prompt"), p.prompt); });
  nested("chosen", [&] { from_json(require(j, "chosen"), p.chosen); });
  nested("rejected", [&] { from_json(require(j, "rejected"), p.rejected); });
  const std::string origin = require_string(j, "origin");
  if (origin == "dm_ranked") {
    p.origin = PairOrigin::DmRanked;
  } else if (origin == "dg_criteria") {
    p.origin = PairOrigin::DgCriteria;
  } else if (origin == "cross_context") {
    p.origin = PairOrigin::CrossContext;
  } else {
    invalid("origin", "unknown value '" + origin + "'");
  }
  p.rejected_prompt_id.reset();
  if (auto it = j.find("rejected_prompt_id"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) invalid("rejected_prompt_id", "expected a string");
    p.rejected_prompt_id = it->get<std::string>();
  }
  auto id = j.find("pair_id");
  p.pair_id = (id != j.end() && id->is_string())
                  ? id->get<std::string>()
                  : compute_pair_id(p.prompt.id, p.chosen.text, p.rejected.text);
  p.extra = collect_extra(j, {"prompt", "chosen", "rejected", "origin", "pair_id", "rejected_prompt_id"});
  validate(p);
}

}  // namespace feedrank
