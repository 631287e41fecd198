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

#include "feedrank/losses.hpp"

#include <cmath>

#include "feedrank/error.hpp"

namespace feedrank {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

LossResult loss_classifier(const ScalarScorer& scorer, const FeatureVector& ordered, double label) {
  LossResult r;
  r.logit = scorer.score(ordered);
  r.loss = softplus(r.logit) - label * r.logit;
  scorer.accumulate_gradient(ordered, sigmoid(r.logit) - label, r.gradient);
  return r;
}

LossResult loss_classifier_symmetric(const ScalarScorer& scorer, const FeatureVector& chosen_first,
                                     const FeatureVector& rejected_first) {
  LossResult a = loss_classifier(scorer, chosen_first, 1.0);
  LossResult b = loss_classifier(scorer, rejected_first, 0.0);
  LossResult r;
  r.loss = 0.5 * (a.loss + b.loss);
  r.logit = 0.5 * (a.logit - b.logit);
  r.gradient.append(a.gradient, 0.5);
  r.gradient.append(b.gradient, 0.5);
  return r;
}

LossResult loss_reward(const ScalarScorer& scorer, const FeatureVector& chosen, const FeatureVector& rejected) {
  LossResult r;
  r.logit = scorer.score(chosen) - scorer.score(rejected);
  r.loss = softplus(-r.logit);
  const double coeff = -sigmoid(-r.logit);
  scorer.accumulate_gradient(chosen, coeff, r.gradient);
  scorer.accumulate_gradient(rejected, -coeff, r.gradient);
  return r;
}

LossResult loss_ranknet(const ScalarScorer& scorer, const FeatureVector& chosen, const FeatureVector& rejected) {
  // P = sigmoid(delta); BCE(P, 1) = -log P.
  LossResult r;
  r.logit = scorer.score(chosen) - scorer.score(rejected);
  const double target = 1.0;
  r.loss = softplus(r.logit) - target * r.logit;
  const double coeff = sigmoid(r.logit) - target;
  scorer.accumulate_gradient(chosen, coeff, r.gradient);
  scorer.accumulate_gradient(rejected, -coeff, r.gradient);
  return r;
}

double dpo_logit(const SequenceScorer& policy, const SequenceScorer& reference, std::string_view chosen,
                 std::string_view rejected, double beta) {
  if (!(beta > 0.0)) throw PreconditionError("dpo beta must be positive");
  const double chosen_ratio = policy.logprob(chosen) - reference.logprob(chosen);
  const double rejected_ratio = policy.logprob(rejected) - reference.logprob(rejected);
  return beta * (chosen_ratio - rejected_ratio);
}

LossResult loss_dpo(const SequenceScorer& policy, std::string_view chosen, std::string_view rejected,
                    double reference_chosen, double reference_rejected, double beta) {
  if (!(beta > 0.0)) throw PreconditionError("dpo beta must be positive");
  LossResult r;
  r.logit = beta * ((policy.logprob(chosen) - reference_chosen) - (policy.logprob(rejected) - reference_rejected));
  r.loss = softplus(-r.logit);
  const double coeff = -sigmoid(-r.logit) * beta;
  policy.accumulate_gradient(chosen, coeff, r.gradient);
  policy.accumulate_gradient(rejected, -coeff, r.gradient);
  return r;
}

LossResult loss_dpo(const SequenceScorer& policy, const SequenceScorer& reference, std::string_view chosen,
                    std::string_view rejected, double beta) {
  return loss_dpo(policy, chosen, rejected, reference.logprob(chosen), reference.logprob(rejected), beta);
}

}  // namespace feedrank
