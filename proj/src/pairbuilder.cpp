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

#include "feedrank/pairbuilder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "feedrank/error.hpp"
#include "feedrank/rng.hpp"

namespace feedrank {

std::vector<PreferencePair> pairs_from_ranking(const RankedCandidateSet& ranked) {
  const std::size_t n = ranked.candidates.size();
  if (n < 2) throw PreconditionError("insufficient candidates");
  check_permutation(ranked.ranking, n);

  std::vector<PreferencePair> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t hi = 0; hi < n; ++hi) {
    for (std::size_t lo = hi + 1; lo < n; ++lo) {
      out.push_back(make_preference_pair(ranked.prompt, ranked.candidates[ranked.ranking[hi]],
                                         ranked.candidates[ranked.ranking[lo]],
                                         PairOrigin::DmRanked));
    }
  }
  return out;
}

PreferencePair pair_from_criteria_generation(const TutoringPrompt& prompt,
                                             const FeedbackCandidate& with_criteria,
                                             const FeedbackCandidate& without_criteria) {
  if (with_criteria.source != FeedbackSource::LlmWithCriteria) {
    throw PreconditionError("with_criteria argument has source '" + with_criteria.source_label() +
                            "', expected llm_with_criteria");
  }
  if (without_criteria.source != FeedbackSource::LlmWithoutCriteria) {
    throw PreconditionError("without_criteria argument has source '" +
                            without_criteria.source_label() + "', expected llm_without_criteria");
  }
  return make_preference_pair(prompt, with_criteria, without_criteria, PairOrigin::DgCriteria);
}

std::vector<PreferencePair> add_cross_context_pairs(const std::vector<PreferencePair>& pairs,
                                                    double fraction, std::uint64_t seed) {
  if (pairs.empty()) throw PreconditionError("cross-context pairs need a non-empty pair list");
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw PreconditionError("cross-context fraction must lie in [0, 1]");
  }

  // Candidate pool grouped by prompt; std::map keeps the layout independent
  // of input order quirks beyond content.
  std::map<std::string, std::vector<const FeedbackCandidate*>> by_prompt;
  std::map<std::string, std::set<std::string>> seen_text;
  for (const auto& p : pairs) {
    for (const FeedbackCandidate* c : {&p.chosen, &p.rejected}) {
      if (seen_text[p.prompt.id].insert(c->text).second) by_prompt[p.prompt.id].push_back(c);
    }
  }
  if (by_prompt.size() < 2) throw PreconditionError("cross-context requires >=2 prompts");

  struct Segment {
    std::string prompt_id;
    std::size_t begin = 0;
    std::size_t size = 0;
  };
  std::vector<const FeedbackCandidate*> pool;
  std::map<std::string, Segment> segments;
  for (const auto& [id, cands] : by_prompt) {
    segments[id] = {id, pool.size(), cands.size()};
    pool.insert(pool.end(), cands.begin(), cands.end());
  }

  std::vector<PreferencePair> out = pairs;
  const std::size_t extra = subset_size(fraction, pairs.size());
  if (extra == 0) return out;

  Rng rng(seed);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));

  out.reserve(pairs.size() + extra);
  for (std::size_t k = 0; k < extra; ++k) {
    const PreferencePair& base = pairs[order[k]];
    const Segment& own = segments.at(base.prompt.id);
    // Uniform draw over the pool with this prompt's segment cut out.
    std::size_t r = rng.uniform_index(pool.size() - own.size);
    if (r >= own.begin) r += own.size;
    const FeedbackCandidate* rejected = pool[r];
    auto seg = std::find_if(segments.begin(), segments.end(), [&](const auto& kv) {
      return r >= kv.second.begin && r < kv.second.begin + kv.second.size;
    });
    out.push_back(make_preference_pair(base.prompt, base.chosen, *rejected, PairOrigin::CrossContext,
                                       seg->first));
  }
  return out;
}

std::size_t subset_size(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

DatasetSplit mix(const MixSpec& spec) {
  if (!(spec.ratio >= 0.0 && spec.ratio <= 1.0)) throw PreconditionError("mix ratio must lie in [0, 1]");

  std::vector<std::size_t> order(spec.supplement.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));

  DatasetSplit out;
  out.name = DatasetName::da(spec.ratio);
  out.train = spec.base.train;
  const std::size_t take = subset_size(spec.ratio, order.size());
  out.train.reserve(out.train.size() + take);
  for (std::size_t i = 0; i < take; ++i) out.train.push_back(spec.supplement.train[order[i]]);
  out.test = spec.supplement.test;
  return out;
}

MixReport mix_report(const MixSpec& spec) {
  return {spec.ratio, subset_size(spec.ratio, spec.supplement.train.size()), spec.base.train.size(),
          spec.supplement.train.size(), spec.seed};
}

void to_json(json& j, const MixReport& r) {
  j = json{{"ratio", r.ratio},
           {"subset_size", r.subset_size},
           {"base_train", r.base_train},
           {"supplement_train", r.supplement_train},
           {"seed", r.seed}};
}

DatasetSplit split_by_prompt(const std::vector<PreferencePair>& pairs, double train_fraction,
                             std::uint64_t seed, DatasetName name) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw PreconditionError("train_fraction must lie strictly between 0 and 1");
  }
  std::set<std::string> unique;
  for (const auto& p : pairs) unique.insert(p.prompt.id);
  if (unique.size() < 2) throw PreconditionError("split_by_prompt requires >=2 prompts");

  std::vector<std::string> ids(unique.begin(), unique.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(ids));
  std::size_t n_train = subset_size(train_fraction, ids.size());
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
  const std::set<std::string> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));

  DatasetSplit out;
  out.name = name;
  for (const auto& p : pairs) (train_ids.count(p.prompt.id) ? out.train : out.test).push_back(p);
  return out;
}

}  // namespace feedrank
