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

// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "feedrank/harness.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/pairbuilder.hpp"
#include "feedrank/rankeval.hpp"
#include "feedrank/ranklearn.hpp"
#include "feedrank/scenario.hpp"
#include "feedrank/synth.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "rbo_oracle.hpp"

using namespace feedrank;
namespace ft = feedrank::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Notes {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      failures_ += (failures_.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome outcome() const { return {pass_, pass_ ? notes_ : failures_ + (notes_.empty() ? "" : " | " + notes_)}; }

 private:
  bool pass_ = true;
  std::string failures_, notes_;
};

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1e", v);
  return buf;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int failures = 0;

void criterion(const std::string& id, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= budget_s) {
    o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("over time budget");
  }
  if (!o.pass) ++failures;
  std::printf("%s %-24s %s [%.2fs < %.0fs]\n", o.pass ? "PASS" : "FAIL", id.c_str(), o.detail.c_str(), secs, budget_s);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

Outcome rbo_case_study() {
  Notes n;
  const std::vector<std::string> gt = {"GPT-4", "GPT-3.5", "DIRECT", "Human", "PrepTutor"};
  const std::vector<std::string> pred = {"GPT-4", "GPT-3.5", "PrepTutor", "Human", "DIRECT"};
  const double v = rbo(gt, pred);
  n.require(std::abs(v - 0.8833) <= 1e-4, "case study rbo " + fmt(v, 6) + " != 0.8833");
  n.require(std::abs(v - ft::rbo_reference(gt, pred)) <= 1e-12, "disagrees with reference implementation");
  n.require(rbo(gt, gt) == 1.0, "identical lists != 1");
  std::vector<std::string> perm = gt;
  std::sort(perm.begin(), perm.end());
  double lo = 1.0;
  int count = 0;
  do {
    lo = std::min(lo, rbo(gt, perm));
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  n.require(count == 120, "expected 120 permutations");
  n.require(std::abs(lo - 0.41667) <= 1e-4, "minimum " + fmt(lo, 5) + " != 0.41667");
  n.note("rbo=" + fmt(v, 6) + " min=" + fmt(lo, 5) + " over " + std::to_string(count) + " perms");
  return n.outcome();
}

Outcome pair_counts() {
  Notes n;
  SyntheticOptions o;
  const auto b = make_synthetic_benchmark(o);
  std::size_t sets = 0;
  for (const auto& s : b.rankings) {
    n.require(pairs_from_ranking(s).size() == 10, "ranked set " + s.prompt.id + " did not give 10 pairs");
    ++sets;
  }
  for (const auto& [split, expected, name] :
       {std::tuple{&b.dm, b.dm_expected, "DM"}, std::tuple{&b.dg, b.dg_expected, "DG"}}) {
    const auto st = validate_stats(*split, expected);
    n.require(st.all_match(), std::string("synthetic ") + name + " counts mismatch");
    n.require(st.leaked_prompt_ids.empty(), std::string("synthetic ") + name + " leaks prompts");
    n.note(std::string("synthetic ") + name + " " + std::to_string(st.train.actual) + "/" +
           std::to_string(st.test.actual));
  }
  n.note(std::to_string(sets) + " ranked sets x 10 pairs");

  for (const auto& [env, expected, name] : {std::tuple{"FEEDRANK_DM_DIR", ExpectedCounts::published_dm(), "DM"},
                                            std::tuple{"FEEDRANK_DG_DIR", ExpectedCounts::published_dg(), "DG"}}) {
    const char* dir = std::getenv(env);
    if (!dir || !*dir || !std::filesystem::exists(std::filesystem::path(dir) / "train.jsonl")) {
      n.note(std::string("published ") + name + " not present (set " + env + "), skipped");
      continue;
    }
    const auto st = validate_stats(load_split(dir), expected);
    n.require(st.all_match(), std::string("published ") + name + " counts " + std::to_string(st.train.actual) + "/" +
                                  std::to_string(st.test.actual));
    n.note(std::string("published ") + name + " " + std::to_string(st.train.actual) + "/" +
           std::to_string(st.test.actual));
  }
  return n.outcome();
}

Outcome losses() {
  Notes n;
  // Zero-information point: untrained scorers and a policy equal to its reference.
  Rng rng(5);
  const auto a = ft::random_features(rng, 64, 6), c = ft::random_features(rng, 64, 6);
  ScalarScorer zero(ScalarArchitecture{64, 0});
  SequenceScorer pi;
  pi.fit_mle({"some chosen feedback", "another chosen feedback"});
  const double ln2 = std::numbers::ln2;
  const std::pair<const char*, double> at_zero[] = {
      {"classifier", loss_classifier_symmetric(zero, a, c).loss},
      {"reward", loss_reward(zero, a, c).loss},
      {"ranknet", loss_ranknet(zero, a, c).loss},
      {"dpo", loss_dpo(pi, pi, "some chosen feedback", "unrelated", 0.1).loss},
  };
  for (const auto& [name, v] : at_zero) n.require(std::abs(v - ln2) <= 1e-9, std::string(name) + " loss at zero " + fmt(v, 12));

  constexpr int kInstances = 100;
  const std::pair<const char*, ft::ScalarLoss> scalar[] = {
      {"classifier", ft::ScalarLoss::Classifier}, {"reward", ft::ScalarLoss::Reward}, {"ranknet", ft::ScalarLoss::RankNet}};
  for (const auto& [name, kind] : scalar) {
    double worst = 0.0;
    for (int i = 0; i < kInstances; ++i) worst = std::max(worst, ft::check_scalar_loss(kind, i % 2 ? 3 : 0, 100 + i));
    n.require(worst < 1e-4, std::string(name) + " gradient gap " + fmt(worst, 8));
    n.note(std::string(name) + " gap " + sci(worst));
  }
  double worst = 0.0;
  for (int i = 0; i < kInstances; ++i) worst = std::max(worst, ft::check_dpo_loss(500 + i, i % 2 + 1));
  n.require(worst < 1e-4, "dpo gradient gap " + fmt(worst, 8));
  n.note("dpo gap " + sci(worst) + "; " + std::to_string(kInstances) + " instances each");
  return n.outcome();
}

Outcome aggregation() {
  Notes n;
  Rng rng(2024);
  int instances = 0, recovered = 0;
  for (std::size_t size = 2; size <= 6; ++size) {
    for (int t = 0; t < 200; ++t, ++instances) {
      auto set = ft::sample_ranked("agg-" + std::to_string(instances));
      set.rank_source = RankSource::HumanAnnotation;
      set.candidates.clear();
      for (std::size_t k = 0; k < size; ++k) {
        set.candidates.push_back(FeedbackCandidate{"option " + std::to_string(k), FeedbackSource::Human, "", {}, {}, json::object()});
      }
      std::vector<std::size_t> truth(size);
      std::iota(truth.begin(), truth.end(), 0);
      rng.shuffle(std::span<std::size_t>(truth));
      std::map<std::string, double> strength;
      for (std::size_t r = 0; r < size; ++r) strength[set.candidates[truth[r]].text] = -static_cast<double>(r);
      std::map<std::pair<std::string, std::string>, double> magnitude;
      PairScorer scorer = [&](const TutoringPrompt&, std::string_view x, std::string_view y) {
        auto key = std::pair{std::string(x), std::string(y)};
        auto it = magnitude.find(key);
        if (it == magnitude.end()) it = magnitude.emplace(key, 0.01 + rng.uniform01()).first;
        return strength.at(key.first) > strength.at(key.second) ? it->second : -it->second;
      };
      const auto ranked = aggregate_ranking(set.prompt, set.candidates, scorer);
      recovered += ranked.ranking == truth;
    }
  }
  n.require(instances >= 500, "too few instances");
  n.require(recovered == instances, std::to_string(instances - recovered) + " orders not recovered");
  n.note(std::to_string(recovered) + "/" + std::to_string(instances) + " planted orders recovered (n=2..6)");
  return n.outcome();
}

Outcome pipeline() {
  Notes n;
  SyntheticOptions o;
  o.n_prompts = 200;
  o.eta = 0.15;
  const auto b = make_synthetic_benchmark(o);
  const Datasets data{b.dm, b.dg, b.rankings};
  ScenarioSpec spec;  // five default seeds, all approaches, default training config

  auto run = [&](ScenarioKind kind, std::optional<double> ratio) {
    ScenarioSpec s = spec;
    s.kind = kind;
    s.da_ratio = ratio;
    return run_scenario(s, data).report;
  };
  const auto dm = run(ScenarioKind::DmToDm, std::nullopt);
  const auto dg = run(ScenarioKind::DgToDm, std::nullopt);
  const auto da0 = run(ScenarioKind::DaToDm, 0.0);
  const auto da1 = run(ScenarioKind::DaToDm, 1.0);

  for (const char* name : {"classifier", "reward"}) {
    for (const auto& r : dm.runs) {
      if (approach_name(r.approach) != name) continue;
      n.require(r.accuracy >= 0.95, std::string("(a) ") + name + " seed " + std::to_string(r.seed) + " DM->DM " +
                                        fmt(r.accuracy));
    }
  }
  std::string table;
  for (const auto& [name, s] : dm.accuracy) {
    const double g = dg.accuracy.at(name).mean, z = da0.accuracy.at(name).mean, one = da1.accuracy.at(name).mean;
    n.require(s.mean >= g, "(b) " + name + " DM->DM " + fmt(s.mean) + " < DG->DM " + fmt(g));
    n.require(one >= z, "(c) " + name + " DA(1.0) " + fmt(one) + " < DA(0.0) " + fmt(z));
    table += (table.empty() ? "" : " ") + name + "=" + fmt(s.mean, 3) + "/" + fmt(g, 3) + "/" + fmt(z, 3) + "/" +
             fmt(one, 3);
  }
  n.note("DM/DG/DA0/DA1 " + table);
  return n.outcome();
}

Outcome determinism() {
  Notes n;
  SyntheticOptions o;
  o.n_prompts = 40;
  o.seed = 11;
  const auto b = make_synthetic_benchmark(o);
  const auto dir = ft::temp_dir("acceptance-determinism");
  for (auto a : kTrainableApproaches) {
    TrainConfig c;
    c.approach = a;
    c.seed = 1234;
    const auto p1 = dir / (std::string(approach_name(a)) + "-1.json");
    const auto p2 = dir / (std::string(approach_name(a)) + "-2.json");
    save_checkpoint(p1, train(b.dm.train, c).model);
    save_checkpoint(p2, train(b.dm.train, c).model);
    n.require(read_text_file(p1) == read_text_file(p2), std::string(approach_name(a)) + " checkpoints differ");
  }
  ScenarioSpec spec;
  spec.seeds = {0, 42};
  const Datasets data{b.dm, b.dg, b.rankings};
  write_scenario_outputs(dir / "run1", run_scenario(spec, data));
  spec.workers = 2;
  write_scenario_outputs(dir / "run2", run_scenario(spec, data));
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "run1")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir / "run1");
    n.require(std::filesystem::exists(dir / "run2" / rel) &&
                  read_text_file(e.path()) == read_text_file(dir / "run2" / rel),
              "report file " + rel.generic_string() + " differs");
    ++files;
  }
  n.note("4 checkpoints and " + std::to_string(files) + " report files byte-identical");
  std::filesystem::remove_all(dir);
  return n.outcome();
}

Outcome generation_offline() {
  Notes n;
  const auto dir = ft::temp_dir("acceptance-generation");
  const auto items = ft::sample_items(30);
  const std::vector<std::string> names = {"alpha", "beta"};
  const std::vector<CriterionSet> sets = {CriterionSet::essential(), CriterionSet::all()};
  DgBuildOptions opts;
  opts.generation.sleep = [](std::chrono::milliseconds) {};

  // Record once against the fake backends, then work from fixtures only.
  std::vector<std::shared_ptr<CompletionProvider>> recorders, fixtures;
  for (const auto& name : names) {
    recorders.push_back(std::make_shared<RecordingProvider>(ft::fake_llm(name), dir / name));
    fixtures.push_back(std::make_shared<FixtureProvider>(name, name + "-model", dir / name));
  }
  for (const auto& c : sets) (void)build_dg(items, recorders, c, 9, opts);

  const auto built = build_dg(items, fixtures, CriterionSet::essential(), 9, opts);
  n.require(built.skipped.empty(), std::to_string(built.skipped.size()) + " generations skipped");
  n.require(built.pair_count == items.size() * names.size(), "pair count " + std::to_string(built.pair_count));
  std::map<std::pair<std::string, std::string>, int> per;
  std::set<std::string> train_prompts, test_prompts;
  for (const auto* side : {&built.split.train, &built.split.test}) {
    for (const auto& p : *side) {
      n.require(p.origin == PairOrigin::DgCriteria, "non dg_criteria pair");
      ++per[{p.prompt.id, p.chosen.provider.value_or("")}];
      (side == &built.split.train ? train_prompts : test_prompts).insert(p.prompt.id);
    }
  }
  for (const auto& [key, count] : per) n.require(count == 1, "duplicate pair for " + key.first);
  n.require(per.size() == items.size() * names.size(), "missing (item, provider) pairs");
  n.require(leaked_prompt_ids(built.split).empty(), "prompt leakage");
  n.require(train_prompts.size() == 27 && test_prompts.size() == 3,
            "split " + std::to_string(train_prompts.size()) + ":" + std::to_string(test_prompts.size()));

  for (const auto& item : items) {
    const auto prompt = item_to_scenario(item, 9);
    auto strip = [](const std::string& t) {
      const auto s = t.find("[Feedback criteria]");
      return s == std::string::npos ? t : t.substr(0, s) + t.substr(t.find("\n\n", s) + 2);
    };
    const auto two = render_generation_prompt(prompt, {PromptTemplate::WithCriteria, sets[0], "", {}, 3});
    const auto five = render_generation_prompt(prompt, {PromptTemplate::WithCriteria, sets[1], "", {}, 3});
    n.require(two != five, "criteria variants render identically");
    n.require(strip(two) == strip(five), "variants differ outside the criteria block");
  }

  SyntheticOptions so;
  so.n_prompts = 20;
  const auto b = make_synthetic_benchmark(so);
  ScenarioSpec spec;
  spec.seeds = {0};
  spec.approaches = {Approach::Reward};
  spec.train.scalar.dimension = 1u << 12;
  const auto sweep = criteria_sweep(sets, spec, items, fixtures, Datasets{b.dm, b.dg, b.rankings}, 9, opts);
  n.require(sweep.variants.size() == 2 && sweep.variants[0]["criteria"] != sweep.variants[1]["criteria"],
            "criteria sweep variants not distinct");
  for (const auto& v : sweep.variants) n.require(v["skipped"].empty(), "sweep variant skipped generations");
  n.note(std::to_string(built.pair_count) + " pairs, 27:3 prompts, 2 sweep variants from fixtures");
  std::filesystem::remove_all(dir);
  return n.outcome();
}

}  // namespace

int main() {
  criterion("rbo-case-study", 1, rbo_case_study);
  criterion("pair-construction-counts", 10, pair_counts);
  criterion("loss-correctness", 30, losses);
  criterion("aggregation-oracle", 30, aggregation);
  criterion("synthetic-pipeline", 600, pipeline);
  criterion("determinism", 300, determinism);
  criterion("generation-offline", 30, generation_offline);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
