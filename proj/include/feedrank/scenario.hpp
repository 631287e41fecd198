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
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "feedrank/provider.hpp"
#include "feedrank/types.hpp"

namespace feedrank {

/// Multiple-choice reading comprehension item with exactly four options.
struct ComprehensionItem {
  std::string id;  // derived from content when absent in the input
  std::string story;
  std::string question;
  std::string answer;
  std::array<std::string, 4> options;
  json extra = json::object();

  bool operator==(const ComprehensionItem&) const = default;
};

void validate(const ComprehensionItem& item);
void to_json(json& j, const ComprehensionItem& item);
void from_json(const json& j, ComprehensionItem& item);

/// Turns an item into an incorrect-answer scenario. The student answer is
/// one of the three distractors, drawn from a stream keyed by (seed, item id).
TutoringPrompt item_to_scenario(const ComprehensionItem& item, std::uint64_t seed);

/// Reads the MCTest layout: a TSV of stories (id, properties, story, then
/// four blocks of question + options A-D) and the matching .ans file of
/// answer letters. Yields four items per story with ids "<story id>.q<k>".
std::vector<ComprehensionItem> convert_mctest(const std::filesystem::path& tsv,
                                              const std::filesystem::path& answers);

// ---------------------------------------------------------------------------

enum class PromptTemplate { WithCriteria, WithoutCriteria };

struct GenerationRequest {
  PromptTemplate prompt_template = PromptTemplate::WithCriteria;
  std::optional<CriterionSet> criteria;  // required iff WithCriteria
  std::string provider;
  json decoding = json::object();  // provider-opaque
  int max_retries = 3;
};

void validate(const GenerationRequest& req);

/// Version tag of the shipped templates; recorded in manifests.
inline constexpr std::string_view kTemplateVersion = "feedrank-feedback-template-v1";

/// Deterministic prompt text. The two templates differ only in the
/// "[Feedback criteria]" block.
std::string render_generation_prompt(const TutoringPrompt& prompt, const GenerationRequest& req);

struct GenerationOptions {
  RetryPolicy retry;
  Sleeper sleep = real_sleeper();
  AuditLog* audit = nullptr;
};

/// Renders, calls the provider with retries and wraps the completion as a
/// candidate with the matching llm_* source.
FeedbackCandidate generate_feedback(const TutoringPrompt& prompt, const GenerationRequest& req,
                                    CompletionProvider& provider, const GenerationOptions& options = {});

struct SkippedGeneration {
  std::string item_id;
  std::string provider;
  std::string reason;
};

void to_json(json& j, const SkippedGeneration& s);

struct DgBuildOptions {
  double train_fraction = 0.9;
  std::size_t max_in_flight = 4;
  GenerationOptions generation;
};

struct DgBuildResult {
  DatasetSplit split;
  std::size_t pair_count = 0;  // before splitting
  std::vector<SkippedGeneration> skipped;
  json manifest;  // providers, criteria, template version, seed, counts
};

/// One with-criteria and one without-criteria generation per (item,
/// provider), paired and split by prompt. Failed generations are skipped and
/// listed; output order does not depend on scheduling.
DgBuildResult build_dg(const std::vector<ComprehensionItem>& items,
                       const std::vector<std::shared_ptr<CompletionProvider>>& providers,
                       const CriterionSet& criteria, std::uint64_t seed,
                       const DgBuildOptions& options = {});

}  // namespace feedrank
