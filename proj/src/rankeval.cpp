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

#include "feedrank/rankeval.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <unordered_map>

#include "feedrank/error.hpp"

namespace feedrank {
namespace {

std::string join(const std::vector<std::string>& items, std::size_t limit = 20) {
  std::string out;
  for (std::size_t i = 0; i < items.size() && i < limit; ++i) out += (i ? ", " : "") + items[i];
  if (items.size() > limit) out += ", ... (" + std::to_string(items.size()) + " total)";
  return out;
}

}  // namespace

double pairwise_accuracy(std::span<const PairwisePrediction> predictions, std::span<const PreferencePair> pairs) {
  if (pairs.empty()) return 0.0;
  std::unordered_map<std::string, const PairwisePrediction*> by_id;
  for (const auto& p : predictions) by_id[p.pair_id] = &p;
  std::vector<std::string> missing;
  std::size_t correct = 0;
  for (const auto& pair : pairs) {
    const auto it = by_id.find(pair.pair_id);
    if (it == by_id.end()) {
      missing.push_back(pair.pair_id);
      continue;
    }
    if (!it->second->tie && it->second->preference == Preference::ChosenFirst) ++correct;
  }
  if (!missing.empty()) throw NotFoundError("missing predictions for pair_ids: " + join(missing));
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

PairScorer model_scorer(const Model& model) {
  auto cache = std::make_shared<ScoringCache>(model);
  return [&model, cache](const TutoringPrompt& prompt, std::string_view first, std::string_view second) {
    return pair_margin(model, prompt, first, second, cache.get());
  };
}

PairScorer ensemble_scorer(const std::map<Approach, const Model*>& models, MarginScales scales) {
  for (Approach a : kTrainableApproaches) {
    if (!models.contains(a) || models.at(a) == nullptr) {
      throw PreconditionError("ensemble needs a model for " + std::string(approach_name(a)));
    }
  }
  auto caches = std::make_shared<std::map<Approach, ScoringCache>>();
  for (const auto& [a, m] : models) caches->emplace(a, ScoringCache(*m));
  return [models, caches, scales = std::move(scales)](const TutoringPrompt& prompt, std::string_view first,
                                                      std::string_view second) {
    std::vector<PairwisePrediction> votes;
    for (Approach a : kTrainableApproaches) {
      votes.push_back(make_prediction("", pair_margin(*models.at(a), prompt, first, second, &caches->at(a)), a));
    }
    return ensemble_vote(votes, scales).margin;
  };
}

std::vector<std::size_t> copeland_order(std::size_t n, const std::function<double(std::size_t, std::size_t)>& margin) {
  std::vector<std::size_t> wins(n, 0);
  std::vector<double> sums(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = margin(i, j);
      ++wins[m > 0.0 ? i : j];
      sums[i] += m;
      sums[j] -= m;
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (wins[a] != wins[b]) return wins[a] > wins[b];
    if (sums[a] != sums[b]) return sums[a] > sums[b];
    return a < b;
  });
  return order;
}

RankedCandidateSet aggregate_ranking(const TutoringPrompt& prompt, const std::vector<FeedbackCandidate>& candidates,
                                     const PairScorer& scorer) {
  if (candidates.size() < 2) throw PreconditionError("aggregation needs at least two candidates");
  RankedCandidateSet out;
  out.prompt = prompt;
  out.candidates = candidates;
  out.rank_source = RankSource::ModelPrediction;
  out.ranking = copeland_order(candidates.size(), [&](std::size_t i, std::size_t j) {
    return scorer(prompt, candidates[i].text, candidates[j].text);
  });
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> overlap_agreements(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("predicted", "ranked lists differ in length (" + std::to_string(a.size()) + " vs " +
                                           std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ValidationError("ground_truth", "ranked lists must be non-empty");
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  if (sa.size() != a.size() || sb.size() != b.size()) {
    throw ValidationError("ground_truth", "ranked lists must not repeat labels");
  }
  if (sa != sb) throw ValidationError("predicted", "ranked lists hold different label sets");

  std::vector<double> agreement;
  std::set<std::string> seen_a, seen_b;
  std::size_t overlap = 0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d] == b[d]) {
      ++overlap;
    } else {
      overlap += seen_b.contains(a[d]) ? 1 : 0;
      overlap += seen_a.contains(b[d]) ? 1 : 0;
    }
    seen_a.insert(a[d]);
    seen_b.insert(b[d]);
    agreement.push_back(static_cast<double>(overlap) / static_cast<double>(d + 1));
  }
  return agreement;
}

double rbo(const std::vector<std::string>& ground_truth, const std::vector<std::string>& predicted,
           const RboOptions& options) {
  const auto agreement = overlap_agreements(ground_truth, predicted);
  const double k = static_cast<double>(agreement.size());
  double value = 0.0;
  if (options.variant == RboOptions::Variant::AverageOverlap) {
    value = std::accumulate(agreement.begin(), agreement.end(), 0.0) / k;
  } else {
    const double p = options.persistence;
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("persistence", "invalid field persistence: must lie in (0, 1)");
    double sum = 0.0;
    for (std::size_t d = 0; d < agreement.size(); ++d) sum += agreement[d] * std::pow(p, static_cast<double>(d + 1));
    value = agreement.back() * std::pow(p, k) + (1.0 - p) / p * sum;
  }
  return std::clamp(value, 0.0, 1.0);
}

void to_json(json& j, const RankingComparison& c) {
  j = json{{"prompt_id", c.prompt_id}, {"ground_truth", c.ground_truth}, {"predicted", c.predicted}, {"rbo", c.rbo}};
}

void from_json(const json& j, RankingComparison& c) {
  c.prompt_id = j.value("prompt_id", std::string());
  c.ground_truth = j.at("ground_truth").get<std::vector<std::string>>();
  c.predicted = j.at("predicted").get<std::vector<std::string>>();
  c.rbo = j.at("rbo").get<double>();
}

std::vector<std::string> candidate_labels(const std::vector<FeedbackCandidate>& candidates) {
  std::map<std::string, std::size_t> counts;
  for (const auto& c : candidates) ++counts[c.source_label()];
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::string label = candidates[i].source_label();
    if (counts[label] > 1) label += "#" + std::to_string(i);
    labels.push_back(std::move(label));
  }
  return labels;
}

std::vector<std::string> ranked_labels(const RankedCandidateSet& set) {
  const auto labels = candidate_labels(set.candidates);
  std::vector<std::string> out;
  for (auto i : set.ranking) out.push_back(labels.at(i));
  return out;
}

RankingComparison compare_rankings(const RankedCandidateSet& truth, const RankedCandidateSet& predicted,
                                   const RboOptions& options) {
  RankingComparison c;
  c.prompt_id = truth.prompt.id;
  c.ground_truth = ranked_labels(truth);
  c.predicted = ranked_labels(predicted);
  c.rbo = rbo(c.ground_truth, c.predicted, options);
  return c;
}

// ---------------------------------------------------------------------------

SeedSummary summarize(std::vector<double> values) {
  SeedSummary s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  const double n = static_cast<double>(s.values.size());
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  if (s.values.size() > 1) {
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

void to_json(json& j, const SeedSummary& s) {
  j = json{{"values", s.values}, {"mean", s.mean}, {"std", s.stddev}, {"n", s.values.size()}};
}

void from_json(const json& j, SeedSummary& s) {
  s.values = j.at("values").get<std::vector<double>>();
  s.mean = j.at("mean").get<double>();
  s.stddev = j.at("std").get<double>();
}

void to_json(json& j, const ApproachEvaluation& e) {
  j = json{{"approach", approach_name(e.approach)},
           {"seed", e.seed},
           {"pairs", e.pairs},
           {"accuracy", e.accuracy},
           {"cases", e.cases},
           {"mean_rbo", e.mean_rbo ? json(*e.mean_rbo) : json(nullptr)}};
}

void from_json(const json& j, ApproachEvaluation& e) {
  e.approach = approach_from_name(j.at("approach").get<std::string>());
  e.seed = j.at("seed").get<std::uint64_t>();
  e.pairs = j.at("pairs").get<std::size_t>();
  e.accuracy = j.at("accuracy").get<double>();
  e.cases = j.at("cases").get<std::vector<RankingComparison>>();
  if (j.contains("mean_rbo") && !j["mean_rbo"].is_null()) {
    e.mean_rbo = j["mean_rbo"].get<double>();
  } else {
    e.mean_rbo.reset();
  }
}

ApproachEvaluation evaluate_scenario(Approach approach, std::uint64_t seed,
                                     std::span<const PairwisePrediction> predictions,
                                     const std::vector<PreferencePair>& test, const std::vector<RankedCandidateSet>& truth,
                                     const PairScorer& scorer, const RboOptions& options) {
  ApproachEvaluation e;
  e.approach = approach;
  e.seed = seed;
  e.pairs = test.size();
  e.accuracy = pairwise_accuracy(predictions, test);
  if (truth.empty()) return e;

  std::map<std::string, const RankedCandidateSet*> by_prompt;
  for (const auto& set : truth) by_prompt.emplace(set.prompt.id, &set);
  std::set<std::string> prompt_ids;
  for (const auto& p : test) prompt_ids.insert(p.prompt.id);
  std::vector<std::string> missing;
  for (const auto& id : prompt_ids) {
    if (!by_prompt.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) throw NotFoundError("no ground-truth ranking for prompt ids: " + join(missing));

  double total = 0.0;
  for (const auto& id : prompt_ids) {
    const RankedCandidateSet& gt = *by_prompt.at(id);
    e.cases.push_back(compare_rankings(gt, aggregate_ranking(gt.prompt, gt.candidates, scorer), options));
    total += e.cases.back().rbo;
  }
  e.mean_rbo = e.cases.empty() ? 0.0 : total / static_cast<double>(e.cases.size());
  return e;
}

}  // namespace feedrank
