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

#include "feedrank/synth.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "feedrank/error.hpp"
#include "feedrank/pairbuilder.hpp"
#include "feedrank/rng.hpp"

namespace feedrank {
namespace {

constexpr std::array<std::string_view, 10> kGoodMarkers = {
    "look again at the second paragraph",
    "which detail tells you where she went",
    "nice try, you are close",
    "think about what happened first",
    "check who gave the gift",
    "you noticed the right place",
    "reread the sentence about the weather",
    "what clue did the story give",
    "good thinking about the order",
    "find the part that mentions the dog",
};

constexpr std::array<std::string_view, 10> kPoorMarkers = {
    "the answer is simply wrong",
    "no.",
    "you should already know this",
    "it was the red hat obviously",
    "incorrect, pay attention",
    "that makes no sense",
    "just pick another option",
    "this is easy",
    "wrong again",
    "the right answer is the park",
};

constexpr std::array<FeedbackSource, 5> kDmSources = {FeedbackSource::Human, FeedbackSource::Direct,
                                                      FeedbackSource::PrepTutor, FeedbackSource::Gpt35,
                                                      FeedbackSource::Gpt4};

std::string pseudo_word(Rng& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::string w;
  const std::size_t syllables = 1 + rng.uniform_index(3);
  for (std::size_t s = 0; s < syllables; ++s) {
    w += consonants[rng.uniform_index(consonants.size())];
    w += vowels[rng.uniform_index(vowels.size())];
  }
  return w;
}

std::string sentence(Rng& rng, std::size_t words) {
  std::string out;
  for (std::size_t i = 0; i < words; ++i) out += (i ? " " : "") + pseudo_word(rng);
  return out;
}

TutoringPrompt make_prompt(const std::string& id, Rng& rng) {
  TutoringPrompt p;
  p.id = id;
  for (int s = 0; s < 4; ++s) p.context += sentence(rng, 8) + ". ";
  p.context.pop_back();
  p.question = "where did " + pseudo_word(rng) + " go after " + pseudo_word(rng) + "?";
  p.student_answer = sentence(rng, 2);
  p.correct_answer = sentence(rng, 2);
  p.dialogue = {Turn{Speaker::Teacher, p.question}, Turn{Speaker::Student, p.student_answer}};
  return p;
}

std::string feedback_text(int level, std::size_t filler, std::size_t pool, Rng& rng) {
  std::vector<std::size_t> good(pool), poor(pool);
  for (std::size_t i = 0; i < good.size(); ++i) good[i] = poor[i] = i;
  rng.shuffle(std::span<std::size_t>(good));
  rng.shuffle(std::span<std::size_t>(poor));
  std::vector<std::string> parts;
  for (int k = 0; k < level; ++k) parts.emplace_back(kGoodMarkers[good[static_cast<std::size_t>(k)]]);
  for (int k = 0; k < 4 - level; ++k) parts.emplace_back(kPoorMarkers[poor[static_cast<std::size_t>(k)]]);
  for (std::size_t k = 0; k < filler; ++k) parts.push_back(pseudo_word(rng));
  rng.shuffle(std::span<std::string>(parts));
  std::string out;
  for (const auto& s : parts) out += (out.empty() ? "" : " ") + s;
  return out;
}

FeedbackCandidate candidate(int level, FeedbackSource source, std::size_t filler, std::size_t pool, Rng& rng,
                            std::set<std::string>& used) {
  FeedbackCandidate c;
  do {
    c.text = feedback_text(level, filler, pool, rng);
  } while (!used.insert(c.text).second);
  c.source = source;
  c.extra = json{{"quality", level}};
  return c;
}

ExpectedCounts expected_split(std::size_t prompts, std::size_t per_prompt, double train_fraction) {
  const std::size_t train_prompts = std::clamp<std::size_t>(subset_size(train_fraction, prompts), 1, prompts - 1);
  return {train_prompts * per_prompt, (prompts - train_prompts) * per_prompt};
}

std::string numbered(std::string_view prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << '-';
  os.width(5);
  os.fill('0');
  os << i;
  return os.str();
}

}  // namespace

void validate(const SyntheticOptions& o) {
  if (o.n_prompts < 10) throw ValidationError("n_prompts", "invalid field n_prompts: must be >= 10");
  if (!(o.eta >= 0.0 && o.eta <= 1.0)) throw ValidationError("eta", "invalid field eta: must lie in [0, 1]");
  if (!(o.dg_marker_coverage > 0.0 && o.dg_marker_coverage <= 1.0)) {
    throw ValidationError("dg_marker_coverage", "invalid field dg_marker_coverage: must lie in (0, 1]");
  }
  if (o.dg_pairs_per_prompt < 1) {
    throw ValidationError("dg_pairs_per_prompt", "invalid field dg_pairs_per_prompt: must be >= 1");
  }
  if (!(o.train_fraction > 0.0 && o.train_fraction < 1.0)) {
    throw ValidationError("train_fraction", "invalid field train_fraction: must lie in (0, 1)");
  }
}

void to_json(json& j, const SyntheticOptions& o) {
  j = json{{"n_prompts", o.n_prompts},
           {"seed", o.seed},
           {"eta", o.eta},
           {"dg_pairs_per_prompt", o.dg_pairs_per_prompt},
           {"train_fraction", o.train_fraction},
           {"filler_words", o.filler_words},
           {"dg_marker_coverage", o.dg_marker_coverage}};
}

int synthetic_quality(const FeedbackCandidate& candidate) {
  if (!candidate.extra.contains("quality")) throw PreconditionError("candidate carries no synthetic quality");
  return candidate.extra.at("quality").get<int>();
}

SyntheticBenchmark make_synthetic_benchmark(const SyntheticOptions& options) {
  validate(options);
  SyntheticBenchmark out;

  Rng dm_rng(derive_seed(options.seed, 1));
  std::vector<PreferencePair> dm_pairs;
  for (std::size_t i = 0; i < options.n_prompts; ++i) {
    RankedCandidateSet set;
    set.prompt = make_prompt(numbered("synth-dm", i), dm_rng);
    std::array<FeedbackSource, 5> sources = kDmSources;
    dm_rng.shuffle(std::span<FeedbackSource>(sources));
    std::set<std::string> used;
    for (std::size_t k = 0; k < 5; ++k) {
      const int level = static_cast<int>(k);
      set.candidates.push_back(candidate(level, sources[k], options.filler_words, kGoodMarkers.size(), dm_rng, used));
    }
    // Present candidates in a random order; the ranking restores level order.
    std::vector<std::size_t> perm = {0, 1, 2, 3, 4};
    dm_rng.shuffle(std::span<std::size_t>(perm));
    std::vector<FeedbackCandidate> shuffled;
    for (auto p : perm) shuffled.push_back(set.candidates[p]);
    set.candidates = std::move(shuffled);
    set.ranking.resize(5);
    for (std::size_t k = 0; k < 5; ++k) set.ranking[4 - static_cast<std::size_t>(synthetic_quality(set.candidates[k]))] = k;
    set.rank_source = RankSource::GroundTruthImport;
    validate(set);
    const auto pairs = pairs_from_ranking(set);
    dm_pairs.insert(dm_pairs.end(), pairs.begin(), pairs.end());
    out.rankings.push_back(std::move(set));
  }
  out.dm = split_by_prompt(dm_pairs, options.train_fraction, derive_seed(options.seed, 2), DatasetName::dm());
  out.dm_expected = expected_split(options.n_prompts, 10, options.train_fraction);

  const std::size_t dg_pool =
      std::max<std::size_t>(4, subset_size(options.dg_marker_coverage, kGoodMarkers.size()));
  Rng dg_rng(derive_seed(options.seed, 3));
  std::vector<PreferencePair> dg_pairs;
  for (std::size_t i = 0; i < options.n_prompts; ++i) {
    const TutoringPrompt prompt = make_prompt(numbered("synth-dg", i), dg_rng);
    std::set<std::string> used;
    for (std::size_t k = 0; k < options.dg_pairs_per_prompt; ++k) {
      int hi = 2 + static_cast<int>(dg_rng.uniform_index(3));
      int lo = static_cast<int>(dg_rng.uniform_index(3));
      if (hi == lo) lo = hi - 1 - static_cast<int>(dg_rng.uniform_index(2));
      FeedbackCandidate with = candidate(hi, FeedbackSource::LlmWithCriteria, options.filler_words, dg_pool, dg_rng, used);
      FeedbackCandidate without = candidate(lo, FeedbackSource::LlmWithoutCriteria, options.filler_words, dg_pool, dg_rng, used);
      const std::string provider = "synthetic-" + std::to_string(k);
      with.provider = without.provider = provider;
      with.criteria_used = CriterionSet::all();
      const bool flip = dg_rng.bernoulli(options.eta);
      PreferencePair pair = flip ? make_preference_pair(prompt, without, with, PairOrigin::DgCriteria)
                                 : make_preference_pair(prompt, with, without, PairOrigin::DgCriteria);
      if (flip) out.flipped_pair_ids.push_back(pair.pair_id);
      dg_pairs.push_back(std::move(pair));
    }
  }
  out.dg = split_by_prompt(dg_pairs, options.train_fraction, derive_seed(options.seed, 4), DatasetName::dg());
  out.dg_expected = expected_split(options.n_prompts, options.dg_pairs_per_prompt, options.train_fraction);

  out.manifest = json{{"generator", "feedrank-synthetic"},
                      {"options", options},
                      {"dm_pairs", dm_pairs.size()},
                      {"dg_pairs", dg_pairs.size()},
                      {"dg_flipped", out.flipped_pair_ids.size()}};
  return out;
}

}  // namespace feedrank
