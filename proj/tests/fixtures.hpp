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

#include <filesystem>
#include <unistd.h>

#include <random>
#include <string>
#include <vector>

#include "feedrank/provider.hpp"
#include "feedrank/scenario.hpp"
#include "feedrank/types.hpp"

namespace feedrank::testing {

inline TutoringPrompt sample_prompt(const std::string& id = "prompt-1") {
  TutoringPrompt p;
  p.id = id;
  p.context = "Sam packed a lunch and walked to the lake with his sister " + id + ".";
  p.question = "Where did Sam walk?";
  p.student_answer = "To the store.";
  p.correct_answer = "To the lake.";
  p.dialogue = {Turn{Speaker::Teacher, p.question}, Turn{Speaker::Student, p.student_answer}};
  return p;
}

inline std::vector<FeedbackCandidate> five_candidates(const std::string& tag = "") {
  const FeedbackSource sources[] = {FeedbackSource::Human, FeedbackSource::Direct, FeedbackSource::PrepTutor,
                                    FeedbackSource::Gpt35, FeedbackSource::Gpt4};
  std::vector<FeedbackCandidate> out;
  for (int k = 0; k < 5; ++k) {
    FeedbackCandidate c;
    c.text = "candidate feedback number " + std::to_string(k) + tag;
    c.source = sources[k];
    out.push_back(c);
  }
  return out;
}

inline RankedCandidateSet sample_ranked(const std::string& id = "prompt-1",
                                        std::vector<std::size_t> ranking = {4, 3, 0, 1, 2}) {
  RankedCandidateSet s;
  s.prompt = sample_prompt(id);
  s.candidates = five_candidates(":" + id);
  s.ranking = std::move(ranking);
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("feedrank-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Synthetic four-option comprehension items with distinct ids.
inline std::vector<ComprehensionItem> sample_items(std::size_t n) {
  std::vector<ComprehensionItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    ComprehensionItem item;
    const std::string k = std::to_string(i);
    item.id = "story" + k + ".q1";
    item.story = "Story " + k + ": Mia found " + k + " shells on the beach and gave them to her brother.";
    item.question = "Who got the shells in story " + k + "?";
    item.options = {"her brother " + k, "her mother " + k, "a crab " + k, "nobody " + k};
    item.answer = item.options[0];
    out.push_back(item);
  }
  return out;
}

/// Deterministic fake LLM: answers depend on the prompt text and on whether
/// the criteria block is present.
inline std::shared_ptr<CompletionProvider> fake_llm(const std::string& name) {
  return std::make_shared<FunctionProvider>(name, name + "-model", [name](const std::string& prompt) {
    const bool with = prompt.find("[Feedback criteria]") != std::string::npos;
    const auto h = std::to_string(std::hash<std::string>{}(prompt) % 100000);
    return with ? "Think about who Mia handed them to (" + name + " " + h + ")."
                : "The answer is her brother (" + name + " " + h + ").";
  });
}

}  // namespace feedrank::testing
