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

#include <cmath>
#include <set>

#include "doctest.h"
#include "feedrank/harness.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/synth.hpp"
#include "fixtures.hpp"

using namespace feedrank;

namespace {

SyntheticBenchmark make_bench(std::size_t n, std::uint64_t seed = 7) {
  SyntheticOptions o;
  o.n_prompts = n;
  o.seed = seed;
  return make_synthetic_benchmark(o);
}

Datasets datasets(const SyntheticBenchmark& b) { return Datasets{b.dm, b.dg, b.rankings}; }

ScenarioSpec small_spec(ScenarioKind kind, std::vector<std::uint64_t> seeds = {0, 1}) {
  ScenarioSpec s;
  s.kind = kind;
  s.seeds = std::move(seeds);
  s.train.scalar.dimension = 1u << 12;
  s.train.epochs = 3;
  return s;
}

std::map<std::string, std::string> dir_contents(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).generic_string()] = read_text_file(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("synthetic benchmark shape and planted truth") {
  auto b = make_bench(50, 3);
  CHECK(b.dm.train.size() == b.dm_expected.train);
  CHECK(b.dm.test.size() == b.dm_expected.test);
  CHECK(b.dm_expected.train == 45 * 10);
  CHECK(b.dm_expected.test == 5 * 10);
  CHECK(b.dg_expected.train == 45 * 2);
  CHECK(b.dg.train.size() + b.dg.test.size() == 100);
  CHECK(leaked_prompt_ids(b.dm).empty());
  CHECK(leaked_prompt_ids(b.dg).empty());
  CHECK(b.rankings.size() == 50);
  for (const auto& set : b.rankings) {
    for (std::size_t r = 0; r + 1 < 5; ++r) {
      CHECK(synthetic_quality(set.candidates[set.ranking[r]]) > synthetic_quality(set.candidates[set.ranking[r + 1]]));
    }
  }
  for (const auto& p : b.dm.train) CHECK(synthetic_quality(p.chosen) > synthetic_quality(p.rejected));

  std::set<std::string> flipped(b.flipped_pair_ids.begin(), b.flipped_pair_ids.end());
  std::size_t inverted = 0;
  for (const auto* split : {&b.dg.train, &b.dg.test}) {
    for (const auto& p : *split) {
      const bool inv = synthetic_quality(p.chosen) < synthetic_quality(p.rejected);
      CHECK(inv == flipped.contains(p.pair_id));
      inverted += inv;
    }
  }
  CHECK(inverted == flipped.size());
  CHECK(b.manifest["dg_flipped"] == flipped.size());

  auto again = make_bench(50, 3);
  CHECK(again.dm.train == b.dm.train);
  CHECK(again.dg.test == b.dg.test);
  CHECK_FALSE(make_bench(50, 4).dm.train == b.dm.train);
}

TEST_CASE("synthetic flip rate follows eta") {
  SyntheticOptions o;
  o.n_prompts = 1000;
  o.eta = 0.15;
  auto b = make_synthetic_benchmark(o);
  const double n = 2000.0;
  const double rate = static_cast<double>(b.flipped_pair_ids.size()) / n;
  // Four binomial standard deviations.
  CHECK(std::abs(rate - 0.15) < 4 * std::sqrt(0.15 * 0.85 / n));
  o.eta = 0.0;
  CHECK(make_synthetic_benchmark(o).flipped_pair_ids.empty());
  o.n_prompts = 5;
  CHECK_THROWS_AS(make_synthetic_benchmark(o), ValidationError);
}

TEST_CASE("scenario spec validation and names") {
  CHECK(scenario_from_name("DG->DM") == ScenarioKind::DgToDm);
  CHECK(scenario_from_name("DA\xe2\x86\x92" "DM") == ScenarioKind::DaToDm);
  CHECK_THROWS_AS(scenario_from_name("DM->DG"), ValidationError);
  auto s = small_spec(ScenarioKind::DaToDm);
  CHECK_THROWS_AS(validate(s), ValidationError);
  s.da_ratio = 0.25;
  CHECK_NOTHROW(validate(s));
  s.seeds = {1, 1};
  CHECK_THROWS_AS(validate(s), ValidationError);
  auto j = json(small_spec(ScenarioKind::DgToDm));
  CHECK(json(j.get<ScenarioSpec>()) == j);
}

TEST_CASE("training pairs per scenario") {
  auto b = make_bench(20);
  Datasets d = datasets(b);
  auto s = small_spec(ScenarioKind::DmToDm);
  s.cross_context_fraction = 0.0;
  CHECK(scenario_training_pairs(s, d, 0) == b.dm.train);
  s.cross_context_fraction = 0.1;
  auto with_cc = scenario_training_pairs(s, d, 0);
  CHECK(with_cc.size() == b.dm.train.size() + subset_size(0.1, b.dm.train.size()));
  s.kind = ScenarioKind::DaToDm;
  s.da_ratio = 0.5;
  s.cross_context_fraction = 0.0;
  CHECK(scenario_training_pairs(s, d, 0).size() == b.dg.train.size() + subset_size(0.5, b.dm.train.size()));
  Datasets no_dg = d;
  no_dg.dg.reset();
  s.kind = ScenarioKind::DgToDm;
  CHECK_THROWS_WITH_AS(scenario_training_pairs(s, no_dg, 0), doctest::Contains("missing dataset DG"), NotFoundError);
}

TEST_CASE("scenario run: report, files and ensemble recompute") {
  auto b = make_bench(30);
  auto spec = small_spec(ScenarioKind::DmToDm);
  auto result = run_scenario(spec, datasets(b));
  const auto& r = result.report;
  CHECK(r.scenario == "DM->DM");
  CHECK(r.test_pairs == b.dm.test.size());
  CHECK(r.runs.size() == 10);
  CHECK(r.training.size() == 8);
  CHECK(r.accuracy.size() == 5);
  CHECK(r.mean_rbo.size() == 5);
  CHECK_FALSE(r.spec.contains("workers"));
  for (const auto& [name, summary] : r.accuracy) {
    CAPTURE(name);
    CHECK(summary.values.size() == 2);
    CHECK(summary.mean >= 0.8);
  }
  for (const auto& run : r.runs) {
    REQUIRE(run.mean_rbo.has_value());
    CHECK(run.cases.size() == 3);
    CHECK(*run.mean_rbo >= 0.0);
    CHECK(*run.mean_rbo <= 1.0);
  }

  auto dir = feedrank::testing::temp_dir("scenario");
  write_scenario_outputs(dir, result);
  for (auto seed : spec.seeds) {
    const double stored = recompute_ensemble_accuracy(dir, seed, b.dm.test);
    double reported = -1;
    for (const auto& run : r.runs)
      if (run.approach == Approach::Ensemble && run.seed == seed) reported = run.accuracy;
    CHECK(stored == reported);
  }
  auto back = load_json_file(dir / "report.json").get<ScenarioReport>();
  CHECK(json(back) == json(r));
  auto rows = parse_summary_csv(read_text_file(dir / "accuracy.csv"));
  REQUIRE(rows.size() == 5);
  auto expected = summary_rows(r);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].approach == expected[i].approach);
    CHECK(rows[i].mean == expected[i].mean);
    CHECK(rows[i].stddev == expected[i].stddev);
    CHECK(rows[i].plot_kind == "line");
  }
  CHECK(load_jsonl<json>(dir / "rbo_cases.jsonl").size() == 30);
  CHECK(load_json_file(dir / "manifest.json")["prediction_files"].size() == 10);

  // Same inputs with more workers: byte-identical outputs.
  spec.workers = 3;
  auto dir3 = feedrank::testing::temp_dir("scenario3");
  write_scenario_outputs(dir3, run_scenario(spec, datasets(b)));
  CHECK(dir_contents(dir3) == dir_contents(dir));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir3);
}

TEST_CASE("scenario without ground truth skips RBO") {
  auto b = make_bench(20);
  Datasets d = datasets(b);
  d.dm_rankings.clear();
  auto spec = small_spec(ScenarioKind::DgToDm, {0});
  spec.approaches = {Approach::Reward};
  auto r = run_scenario(spec, d).report;
  CHECK(r.mean_rbo.empty());
  CHECK(r.accuracy.count("reward") == 1);
  CHECK(summary_rows(r)[0].plot_kind == "bar");
}

TEST_CASE("summary CSV parsing errors") {
  CHECK_THROWS_AS(parse_summary_csv("h\nDM->DM,reward,0.5\n"), ParseError);
  CHECK_THROWS_AS(parse_summary_csv("h\nDM->DM,reward,abc,0,1,line\n"), ParseError);
}

TEST_CASE("ratio sweep ordering") {
  auto b = make_bench(20);
  auto spec = small_spec(ScenarioKind::DaToDm, {0});
  spec.approaches = {Approach::Reward, Approach::RankNet};
  auto sweep = ratio_sweep({0.0, 0.5, 1.0}, spec, datasets(b));
  REQUIRE(sweep.rows.size() == 6);
  CHECK(sweep.rows[0].approach == "reward");
  CHECK(sweep.rows[2].ratio == 1.0);
  CHECK(sweep.rows[3].approach == "ranknet");
  CHECK(sweep.scenarios[1].da_ratio == 0.5);
  CHECK(sweep.scenarios[2].train_pairs.at(0) > sweep.scenarios[0].train_pairs.at(0));
  const auto csv = ratio_csv(sweep);
  CHECK(csv.rfind("ratio,approach,mean,std,n\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK_THROWS_AS(ratio_sweep({1.5}, spec, datasets(b)), ValidationError);
}

TEST_CASE("criteria sweep builds variants and a delta table") {
  auto b = make_bench(20);
  auto spec = small_spec(ScenarioKind::DgToDm, {0});
  spec.approaches = {Approach::Reward};
  auto items = feedrank::testing::sample_items(12);
  std::vector<std::shared_ptr<CompletionProvider>> providers = {feedrank::testing::fake_llm("a"),
                                                                feedrank::testing::fake_llm("b")};
  DgBuildOptions opts;
  opts.generation.sleep = [](std::chrono::milliseconds) {};
  auto rep = criteria_sweep({CriterionSet::essential(), CriterionSet::all()}, spec, items, providers, datasets(b), 3,
                            opts);
  CHECK(rep.criteria_sets == std::vector<std::string>{"Correct,Revealing",
                                                      "Correct,Revealing,Guidance,Diagnostic,Encouragement"});
  CHECK(rep.model_configs == std::vector<std::string>{"all", "a", "b"});
  REQUIRE(rep.rows.size() == 3);
  for (const auto& row : rep.rows) {
    CHECK(row.accuracy.size() == 2);
    CHECK(row.delta[0] == 0.0);
    CHECK(row.delta[1] == row.accuracy[1] - row.accuracy[0]);
  }
  CHECK(rep.variants.size() == 2);
  CHECK(rep.variants[1]["pairs"] == 24);
  CHECK(criteria_csv(rep).find("reward,a,\"Correct,Revealing\",") != std::string::npos);
}
