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

#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "feedrank/pairbuilder.hpp"
#include "feedrank/rankeval.hpp"
#include "feedrank/rng.hpp"
#include "feedrank/synth.hpp"
#include "fixtures.hpp"
#include "rbo_oracle.hpp"

using namespace feedrank;
using feedrank::testing::rbo_reference;

namespace {

using Labels = std::vector<std::string>;

const Labels kCaseA_truth = {"GPT-4", "GPT-3.5", "DIRECT", "Human", "PrepTutor"};
const Labels kCaseA_pred = {"GPT-4", "GPT-3.5", "PrepTutor", "Human", "DIRECT"};
const Labels kCaseB_truth = {"GPT-3.5", "PrepTutor", "Human", "GPT-4", "DIRECT"};
const Labels kCaseB_pred = {"GPT-4", "GPT-3.5", "DIRECT", "PrepTutor", "Human"};

Labels letters(std::size_t n) {
  Labels out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
  return out;
}

}  // namespace

TEST_CASE("RBO on the worked five-system examples") {
  CHECK(rbo(kCaseA_truth, kCaseA_pred) == doctest::Approx(0.883333).epsilon(1e-6));
  auto agree = overlap_agreements(kCaseA_truth, kCaseA_pred);
  CHECK(agree == std::vector<double>{1.0, 1.0, 2.0 / 3.0, 0.75, 1.0});
  // Hand count: overlaps 0, 1, 1, 3, 5 at depths 1..5.
  CHECK(rbo(kCaseB_truth, kCaseB_pred) == doctest::Approx((0 + 0.5 + 1.0 / 3 + 0.75 + 1) / 5).epsilon(1e-12));
  CHECK(rbo(kCaseB_truth, kCaseB_pred) == doctest::Approx(0.516667).epsilon(1e-6));
}

TEST_CASE("RBO properties over all permutations of five labels") {
  const Labels base = letters(5);
  Labels perm = base;
  double lo = 1.0;
  do {
    const double v = rbo(base, perm);
    CHECK(v == doctest::Approx(rbo_reference(base, perm)).epsilon(1e-12));
    CHECK(v == doctest::Approx(rbo(perm, base)).epsilon(1e-12));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK((v == 1.0) == (perm == base));
    const double ext = rbo(base, perm, {RboOptions::Variant::Extrapolated, 0.9});
    CHECK(ext == doctest::Approx(rbo_reference(base, perm, 0.9)).epsilon(1e-12));
    lo = std::min(lo, v);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(lo == doctest::Approx(5.0 / 12.0).epsilon(1e-12));
  Labels rev(base.rbegin(), base.rend());
  CHECK(rbo(base, rev) == doctest::Approx(lo));
}

TEST_CASE("RBO weights the top more heavily") {
  Rng rng(3);
  for (std::size_t n = 3; n <= 9; ++n) {
    const Labels base = letters(n);
    for (std::size_t i = 0; i + 2 < n; ++i) {
      Labels top = base, deeper = base;
      std::swap(top[i], top[i + 1]);
      std::swap(deeper[i + 1], deeper[i + 2]);
      CHECK(rbo(base, top) < rbo(base, deeper));
    }
  }
  for (double p : {0.5, 0.9, 0.99}) {
    const Labels base = letters(7);
    CHECK(rbo(base, base, {RboOptions::Variant::Extrapolated, p}) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("RBO input validation") {
  CHECK_THROWS_AS(rbo({"a", "b"}, {"a"}), ValidationError);
  CHECK_THROWS_AS(rbo({"a", "b"}, {"a", "c"}), ValidationError);
  CHECK_THROWS_AS(rbo({"a", "a"}, {"a", "a"}), ValidationError);
  CHECK_THROWS_AS(rbo({}, {}), ValidationError);
  CHECK_THROWS_AS(rbo({"a", "b"}, {"b", "a"}, {RboOptions::Variant::Extrapolated, 1.0}), ValidationError);
}

TEST_CASE("Copeland aggregation") {
  // Cycle A>B>C>A with margins 3, 1, 2: wins all 1, margin sums A=1, B=-2, C=1.
  auto order = copeland_order(3, [](std::size_t i, std::size_t j) {
    if (i == 0 && j == 1) return 3.0;
    if (i == 1 && j == 2) return 1.0;
    return -2.0;  // (0, 2): C beats A
  });
  CHECK(order == std::vector<std::size_t>{0, 2, 1});

  auto ties = copeland_order(3, [](std::size_t, std::size_t) { return 0.0; });
  CHECK(ties == std::vector<std::size_t>{2, 1, 0});  // j wins every tie

  int queried = 0;
  (void)copeland_order(6, [&](std::size_t i, std::size_t j) {
    CHECK(i < j);
    ++queried;
    return 1.0;
  });
  CHECK(queried == 15);
}

TEST_CASE("Copeland recovers transitive tournaments") {
  Rng rng(11);
  int count = 0;
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int t = 0; t < 120; ++t, ++count) {
      std::vector<std::size_t> truth(n);
      std::iota(truth.begin(), truth.end(), 0);
      rng.shuffle(std::span<std::size_t>(truth));
      std::vector<std::size_t> pos(n);
      for (std::size_t r = 0; r < n; ++r) pos[truth[r]] = r;
      std::vector<double> mag(n * n);
      for (auto& m : mag) m = 0.01 + rng.uniform01();
      auto order = copeland_order(n, [&](std::size_t i, std::size_t j) {
        return pos[i] < pos[j] ? mag[i * n + j] : -mag[i * n + j];
      });
      CHECK(order == truth);
    }
  }
  CHECK(count >= 500);
}

TEST_CASE("aggregate ranking from a pair scorer") {
  auto s = feedrank::testing::sample_ranked();
  std::map<std::string, double> quality;
  for (std::size_t r = 0; r < s.ranking.size(); ++r) quality[s.candidates[s.ranking[r]].text] = -double(r);
  PairScorer scorer = [&](const TutoringPrompt&, std::string_view a, std::string_view b) {
    return quality[std::string(a)] - quality[std::string(b)];
  };
  auto agg = aggregate_ranking(s.prompt, s.candidates, scorer);
  CHECK(agg.ranking == s.ranking);
  CHECK(agg.rank_source == RankSource::ModelPrediction);
  auto cmp = compare_rankings(s, agg);
  CHECK(cmp.rbo == 1.0);
  CHECK(cmp.ground_truth == ranked_labels(s));
  CHECK(json(cmp).get<RankingComparison>().predicted == cmp.predicted);
}

TEST_CASE("candidate labels disambiguate repeats") {
  auto cands = feedrank::testing::five_candidates();
  cands[3].source = FeedbackSource::Human;
  auto labels = candidate_labels(cands);
  CHECK(labels[0] == "human#0");
  CHECK(labels[3] == "human#3");
  CHECK(labels[1] == "direct");
}

TEST_CASE("pairwise accuracy") {
  auto pairs = pairs_from_ranking(feedrank::testing::sample_ranked());
  std::vector<PairwisePrediction> preds;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double m = i < 6 ? 1.0 : (i < 8 ? 0.0 : -1.0);
    preds.push_back(make_prediction(pairs[i].pair_id, m, Approach::Reward));
  }
  std::reverse(preds.begin(), preds.end());
  CHECK(pairwise_accuracy(preds, pairs) == doctest::Approx(0.6));
  preds.pop_back();
  CHECK_THROWS_AS(pairwise_accuracy(preds, pairs), NotFoundError);
}

TEST_CASE("seed summaries use the sample deviation") {
  auto s = summarize({0.5, 0.7, 0.9});
  CHECK(s.mean == doctest::Approx(0.7));
  CHECK(s.stddev == doctest::Approx(0.2));
  CHECK(summarize({0.3}).stddev == 0.0);
  json j = s;
  CHECK(j["n"] == 3);
  CHECK(j.get<SeedSummary>().values == s.values);
}

TEST_CASE("scenario evaluation with and without ground truth") {
  SyntheticOptions o;
  o.n_prompts = 20;
  auto b = make_synthetic_benchmark(o);
  PairScorer oracle = [](const TutoringPrompt&, std::string_view a, std::string_view c) {
    auto level = [](std::string_view t) { return static_cast<double>(std::count(t.begin(), t.end(), '+')); };
    return level(a) - level(c);
  };
  // Perfect predictions from the planted levels.
  std::vector<PairwisePrediction> preds;
  for (const auto& p : b.dm.test) {
    preds.push_back(make_prediction(p.pair_id, synthetic_quality(p.chosen) - synthetic_quality(p.rejected),
                                    Approach::Reward));
  }
  std::map<std::string, int> levels;
  for (const auto& set : b.rankings)
    for (const auto& c : set.candidates) levels[c.text] = synthetic_quality(c);
  PairScorer by_level = [&](const TutoringPrompt&, std::string_view a, std::string_view c) {
    return static_cast<double>(levels.at(std::string(a)) - levels.at(std::string(c)));
  };
  auto e = evaluate_scenario(Approach::Reward, 7, preds, b.dm.test, b.rankings, by_level);
  CHECK(e.accuracy == 1.0);
  REQUIRE(e.mean_rbo.has_value());
  CHECK(*e.mean_rbo == 1.0);
  CHECK(std::is_sorted(e.cases.begin(), e.cases.end(),
                       [](const auto& x, const auto& y) { return x.prompt_id < y.prompt_id; }));
  auto round = json(e).get<ApproachEvaluation>();
  CHECK(round.cases.size() == e.cases.size());
  CHECK(round.mean_rbo == e.mean_rbo);

  auto no_truth = evaluate_scenario(Approach::Reward, 7, preds, b.dm.test, {}, oracle);
  CHECK_FALSE(no_truth.mean_rbo.has_value());
  CHECK(json(no_truth)["mean_rbo"].is_null());

  std::vector<RankedCandidateSet> partial(b.rankings.begin(), b.rankings.begin() + 1);
  CHECK_THROWS_AS(evaluate_scenario(Approach::Reward, 7, preds, b.dm.test, partial, by_level), NotFoundError);
}
