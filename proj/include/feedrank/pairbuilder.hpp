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

#include <cstdint>
#include <vector>

#include "feedrank/types.hpp"

namespace feedrank {

/// All n(n-1)/2 pairs implied by a strict ranking. Pairs are ordered by the
/// chosen candidate's rank, then the rejected candidate's rank.
std::vector<PreferencePair> pairs_from_ranking(const RankedCandidateSet& ranked);

/// The criteria-conditioned generation becomes chosen, the unconditioned one
/// rejected.
PreferencePair pair_from_criteria_generation(const TutoringPrompt& prompt,
                                             const FeedbackCandidate& with_criteria,
                                             const FeedbackCandidate& without_criteria);

/// Appends floor(fraction * |pairs|) cross-context pairs. Each one reuses the
/// chosen text of a distinct existing pair and draws its rejected text
/// uniformly from the candidate pool of all other prompts.
std::vector<PreferencePair> add_cross_context_pairs(const std::vector<PreferencePair>& pairs,
                                                    double fraction, std::uint64_t seed);

inline constexpr double kDefaultCrossContextFraction = 0.1;

struct MixSpec {
  DatasetSplit base;        // DG
  DatasetSplit supplement;  // DM
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

/// floor(ratio * n) with a guard against representation error such as
/// 0.29 * 100 = 28.999999999999996.
std::size_t subset_size(double ratio, std::size_t n);

/// DA split: base.train plus a seeded prefix of one shuffle of
/// supplement.train; test is supplement.test unchanged. Subsets nest as the
/// ratio grows under a fixed seed.
DatasetSplit mix(const MixSpec& spec);

struct MixReport {
  double ratio = 0.0;
  std::size_t subset_size = 0;
  std::size_t base_train = 0;
  std::size_t supplement_train = 0;
  std::uint64_t seed = 0;
};

MixReport mix_report(const MixSpec& spec);
void to_json(json& j, const MixReport& r);

/// Partitions prompts (not pairs): sorted unique prompt ids are shuffled by
/// seed and the first floor(train_fraction * m) go to train, clamped so both
/// sides hold at least one prompt. Input order is kept within each side.
DatasetSplit split_by_prompt(const std::vector<PreferencePair>& pairs, double train_fraction,
                             std::uint64_t seed, DatasetName name = DatasetName::dg());

}  // namespace feedrank
