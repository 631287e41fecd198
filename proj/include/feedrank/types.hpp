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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace feedrank {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tutoring prompt

enum class Speaker { Teacher, Student };

struct Turn {
  Speaker speaker = Speaker::Teacher;
  std::string utterance;

  bool operator==(const Turn&) const = default;
};

/// One incorrect-answer tutoring scenario: the prompt side of a preference triple.
struct TutoringPrompt {
  std::string id;
  std::string context;
  std::vector<Turn> dialogue;
  std::string question;
  std::string student_answer;
  std::string correct_answer;
  json extra = json::object();  // unknown fields, preserved on round-trip

  bool operator==(const TutoringPrompt&) const = default;
};

void validate(const TutoringPrompt& prompt);

// ---------------------------------------------------------------------------
// Feedback criteria

enum class Criterion : std::uint8_t { Correct, Revealing, Guidance, Diagnostic, Encouragement };

inline constexpr std::size_t kCriterionCount = 5;

std::string_view criterion_name(Criterion c);
/// Definition sentence embedded into criteria-conditioned generation prompts.
std::string_view criterion_definition(Criterion c);
/// Case-insensitive lookup; throws ValidationError for unknown names.
Criterion criterion_from_name(std::string_view name);

/// Non-empty duplicate-free subset of the five criteria, iterated in
/// canonical order.
class CriterionSet {
 public:
  CriterionSet() = default;
  CriterionSet(std::initializer_list<Criterion> members);

  static CriterionSet all();
  static CriterionSet essential();  // {Correct, Revealing}
  static CriterionSet from_names(const std::vector<std::string>& names);
  /// Parses "correct,revealing" or "all".
  static CriterionSet parse(std::string_view spec);

  void insert(Criterion c) { bits_ |= bit(c); }
  bool contains(Criterion c) const { return (bits_ & bit(c)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const;
  std::vector<Criterion> members() const;
  std::vector<std::string> names() const;
  bool is_essential_pair() const { return *this == essential(); }

  bool operator==(const CriterionSet&) const = default;

 private:
  static std::uint8_t bit(Criterion c) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(c)); }
  std::uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Feedback candidates and rankings

enum class FeedbackSource {
  Human,
  Direct,
  PrepTutor,
  Gpt35,
  Gpt4,
  LlmWithCriteria,
  LlmWithoutCriteria,
  Other,
};

std::string_view source_name(FeedbackSource s);  // "other" for Other
/// Maps a label to a source; unknown labels become Other.
FeedbackSource source_from_label(std::string_view label);

struct FeedbackCandidate {
  std::string text;
  FeedbackSource source = FeedbackSource::Other;
  std::string other_label;  // only meaningful for FeedbackSource::Other
  std::optional<std::string> provider;
  std::optional<CriterionSet> criteria_used;
  json extra = json::object();

  /// Serialized source label: the enum name, or other_label for Other.
  std::string source_label() const;

  bool operator==(const FeedbackCandidate&) const = default;
};

void validate(const FeedbackCandidate& candidate);

enum class RankSource { HumanAnnotation, ModelPrediction, GroundTruthImport };

std::string_view rank_source_name(RankSource s);

/// A prompt with n >= 2 candidates and a strict ranking (candidate indices,
/// best first).
struct RankedCandidateSet {
  TutoringPrompt prompt;
  std::vector<FeedbackCandidate> candidates;
  std::vector<std::size_t> ranking;
  RankSource rank_source = RankSource::GroundTruthImport;
  json extra = json::object();

  bool operator==(const RankedCandidateSet&) const = default;
};

/// Imported ground-truth sets must carry exactly this many candidates.
inline constexpr std::size_t kImportedCandidateCount = 5;

void validate(const RankedCandidateSet& set);
/// Throws ValidationError unless `ranking` is a permutation of 0..n-1.
void check_permutation(const std::vector<std::size_t>& ranking, std::size_t n);

// ---------------------------------------------------------------------------
// Preference pairs

enum class PairOrigin { DmRanked, DgCriteria, CrossContext };

std::string_view origin_name(PairOrigin o);

struct PreferencePair {
  TutoringPrompt prompt;
  FeedbackCandidate chosen;
  FeedbackCandidate rejected;
  PairOrigin origin = PairOrigin::DmRanked;
  std::string pair_id;
  /// Prompt the rejected text was drawn from; set only for cross-context pairs.
  std::optional<std::string> rejected_prompt_id;
  json extra = json::object();

  bool operator==(const PreferencePair&) const = default;
};

std::string compute_pair_id(std::string_view prompt_id, std::string_view chosen_text,
                            std::string_view rejected_text);

/// Builds a pair, fills in pair_id and validates it.
PreferencePair make_preference_pair(TutoringPrompt prompt, FeedbackCandidate chosen,
                                    FeedbackCandidate rejected, PairOrigin origin,
                                    std::optional<std::string> rejected_prompt_id = std::nullopt);

void validate(const PreferencePair& pair);

// ---------------------------------------------------------------------------
// Dataset splits

struct DatasetName {
  enum class Kind { DM, DG, DA };
  Kind kind = Kind::DM;
  double ratio = 0.0;  // DA only

  static DatasetName dm() { return {Kind::DM, 0.0}; }
  static DatasetName dg() { return {Kind::DG, 0.0}; }
  static DatasetName da(double ratio) { return {Kind::DA, ratio}; }
  static DatasetName parse(std::string_view text);

  /// "DM", "DG" or "DA(0.05)".
  std::string str() const;

  bool operator==(const DatasetName&) const = default;
};

struct DatasetSplit {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> test;
  DatasetName name;
};

/// Prompt ids present on both sides of the split, sorted.
std::vector<std::string> leaked_prompt_ids(const DatasetSplit& split);

/// Checks the DA ratio range and that no prompt id crosses the split.
void validate(const DatasetSplit& split);

// ---------------------------------------------------------------------------
// JSON conversion (nlohmann ADL hooks). from_json validates the record.

void to_json(json& j, const Turn& t);
void from_json(const json& j, Turn& t);
void to_json(json& j, const TutoringPrompt& p);
void from_json(const json& j, TutoringPrompt& p);
void to_json(json& j, const CriterionSet& c);
void from_json(const json& j, CriterionSet& c);
void to_json(json& j, const FeedbackCandidate& c);
void from_json(const json& j, FeedbackCandidate& c);
void to_json(json& j, const RankedCandidateSet& s);
void from_json(const json& j, RankedCandidateSet& s);
void to_json(json& j, const PreferencePair& p);
void from_json(const json& j, PreferencePair& p);

std::string trim(std::string_view s);

}  // namespace feedrank
