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
#include <string>
#include <vector>

#include "feedrank/jsonl.hpp"
#include "feedrank/types.hpp"

namespace feedrank {

/// Desk-scale benchmark with planted ground truth. Every candidate text has a
/// quality level in 0..4 built from `level` good marker phrases and
/// `4 - level` poor ones, mixed with random filler words. The level is kept
/// in the candidate's extra field under "quality". DG-like texts draw their
/// markers from a leading share of each pool only, so a model trained on
/// them has not seen every marker that decides DM rankings.
struct SyntheticOptions {
  std::size_t n_prompts = 200;       // prompts per dataset, >= 10
  std::uint64_t seed = 0;
  double eta = 0.15;                 // label-flip rate of the DG-like pairs
  std::size_t dg_pairs_per_prompt = 2;
  double train_fraction = 0.9;
  std::size_t filler_words = 6;
  double dg_marker_coverage = 0.6;   // share of each marker pool DG texts draw from
};

void validate(const SyntheticOptions& o);
void to_json(json& j, const SyntheticOptions& o);

struct SyntheticBenchmark {
  DatasetSplit dm;                          // all pairs of five-candidate rankings
  DatasetSplit dg;                          // criteria-style pairs with label noise
  std::vector<RankedCandidateSet> rankings; // ground truth for the DM prompts
  std::vector<std::string> flipped_pair_ids;
  ExpectedCounts dm_expected;
  ExpectedCounts dg_expected;
  json manifest;
};

SyntheticBenchmark make_synthetic_benchmark(const SyntheticOptions& options);

/// The "quality" value stored on a synthetic candidate.
int synthetic_quality(const FeedbackCandidate& candidate);

}  // namespace feedrank
