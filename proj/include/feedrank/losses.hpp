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

#include <string_view>

#include "feedrank/features.hpp"
#include "feedrank/scorer.hpp"

namespace feedrank {

/// Loss value, its parameter gradient, and the pre-sigmoid logit the loss
/// was computed from (margin for pairwise losses).
struct LossResult {
  double loss = 0.0;
  double logit = 0.0;
  SparseGradient gradient;
};

/// log(1 + exp(x)) without overflow.
double softplus(double x);
double sigmoid(double x);

/// Binary cross-entropy of sigmoid(score(ordered)) against `label` (1 when
/// the first slot holds the chosen feedback, 0 otherwise).
LossResult loss_classifier(const ScalarScorer& scorer, const FeatureVector& ordered, double label);

/// Mean of the two orderings: (chosen, rejected) labelled 1 and
/// (rejected, chosen) labelled 0.
LossResult loss_classifier_symmetric(const ScalarScorer& scorer, const FeatureVector& chosen_first,
                                     const FeatureVector& rejected_first);

/// -log sigmoid(s(chosen) - s(rejected)).
LossResult loss_reward(const ScalarScorer& scorer, const FeatureVector& chosen, const FeatureVector& rejected);

/// BCE(sigmoid(s(chosen) - s(rejected)), 1). Same closed form as the reward
/// loss; kept separate because the approaches are trained independently.
LossResult loss_ranknet(const ScalarScorer& scorer, const FeatureVector& chosen, const FeatureVector& rejected);

/// beta * [(log pi(c) - log ref(c)) - (log pi(r) - log ref(r))].
double dpo_logit(const SequenceScorer& policy, const SequenceScorer& reference, std::string_view chosen,
                 std::string_view rejected, double beta);

/// -log sigmoid(dpo_logit). Gradient is with respect to the policy only.
LossResult loss_dpo(const SequenceScorer& policy, const SequenceScorer& reference, std::string_view chosen,
                    std::string_view rejected, double beta);

/// Same, with the frozen reference log-probabilities supplied by the caller.
LossResult loss_dpo(const SequenceScorer& policy, std::string_view chosen, std::string_view rejected,
                    double reference_chosen, double reference_rejected, double beta);

}  // namespace feedrank
