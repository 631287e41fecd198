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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedrank/ranklearn.hpp"
#include "feedrank/types.hpp"

namespace feedrank {

/// Fraction of pairs predicted chosen_first. Ties count as wrong. Every pair
/// needs a prediction with a matching pair_id.
double pairwise_accuracy(std::span<const PairwisePrediction> predictions, std::span<const PreferencePair> pairs);

/// Signed margin of `first` over `second` (> 0 prefers `first`).
using PairScorer = std::function<double(const TutoringPrompt& prompt, std::string_view first, std::string_view second)>;

PairScorer model_scorer(const Model& model);

/// Ensemble of the four approach models; margins are compared after division
/// by each approach's scale.
PairScorer ensemble_scorer(const std::map<Approach, const Model*>& models, MarginScales scales);

/// Copeland order over n items. `margin(i, j)` is queried once for each i < j;
/// the winner takes one point (j wins a zero-margin tie) and each side adds
/// its signed margin to a running sum. Sorted by wins, then margin sum
/// (both descending), then index.
std::vector<std::size_t> copeland_order(std::size_t n, const std::function<double(std::size_t, std::size_t)>& margin);

/// Ranks the candidates with pairwise margins from `scorer`.
RankedCandidateSet aggregate_ranking(const TutoringPrompt& prompt, const std::vector<FeedbackCandidate>& candidates,
                                     const PairScorer& scorer);

// ---------------------------------------------------------------------------

struct RboOptions {
  enum class Variant { AverageOverlap, Extrapolated };
  Variant variant = Variant::AverageOverlap;
  double persistence = 0.9;  // Extrapolated only, in (0, 1)
};

/// Overlap proportions A_d = |top_d(a) ∩ top_d(b)| / d for d = 1..n.
std::vector<double> overlap_agreements(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Rank-biased overlap of two permutations of one label set.
///   AverageOverlap:  mean of A_d.
///   Extrapolated:    A_k p^k + (1-p)/p * sum_d A_d p^d, with k = n.
double rbo(const std::vector<std::string>& ground_truth, const std::vector<std::string>& predicted,
           const RboOptions& options = {});

struct RankingComparison {
  std::string prompt_id;
  std::vector<std::string> ground_truth;
  std::vector<std::string> predicted;
  double rbo = 0.0;
};

void to_json(json& j, const RankingComparison& c);
void from_json(const json& j, RankingComparison& c);

/// Display labels for a candidate list: the source label, suffixed with
/// "#<index>" for labels that occur more than once.
std::vector<std::string> candidate_labels(const std::vector<FeedbackCandidate>& candidates);

/// Labels of a ranked set, best first.
std::vector<std::string> ranked_labels(const RankedCandidateSet& set);

RankingComparison compare_rankings(const RankedCandidateSet& truth, const RankedCandidateSet& predicted,
                                   const RboOptions& options = {});

// ---------------------------------------------------------------------------

struct SeedSummary {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
};

SeedSummary summarize(std::vector<double> values);
void to_json(json& j, const SeedSummary& s);
void from_json(const json& j, SeedSummary& s);

struct ApproachEvaluation {
  Approach approach = Approach::Reward;
  std::uint64_t seed = 0;
  std::size_t pairs = 0;
  double accuracy = 0.0;
  std::vector<RankingComparison> cases;  // sorted by prompt id
  std::optional<double> mean_rbo;        // absent without ground-truth rankings
};

void to_json(json& j, const ApproachEvaluation& e);
void from_json(const json& j, ApproachEvaluation& e);

/// Accuracy of `predictions` on the test pairs, plus aggregated rankings and
/// RBO for every test prompt when `truth` is non-empty. Every test prompt
/// must then have a ground-truth set.
ApproachEvaluation evaluate_scenario(Approach approach, std::uint64_t seed,
                                     std::span<const PairwisePrediction> predictions,
                                     const std::vector<PreferencePair>& test, const std::vector<RankedCandidateSet>& truth,
                                     const PairScorer& scorer, const RboOptions& options = {});

}  // namespace feedrank
