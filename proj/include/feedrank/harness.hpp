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
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "feedrank/pairbuilder.hpp"
#include "feedrank/rankeval.hpp"
#include "feedrank/ranklearn.hpp"
#include "feedrank/scenario.hpp"
#include "feedrank/types.hpp"

namespace feedrank {

enum class ScenarioKind { DmToDm, DgToDm, DaToDm };

/// "DM->DM", "DG->DM" or "DA->DM".
std::string_view scenario_name(ScenarioKind k);
/// Accepts the names above, with "->" or the arrow character.
ScenarioKind scenario_from_name(std::string_view name);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::DmToDm;
  std::optional<double> da_ratio;  // required for DA->DM
  std::vector<Approach> approaches = {Approach::Classifier, Approach::Reward, Approach::Dpo, Approach::RankNet,
                                      Approach::Ensemble};
  std::vector<std::uint64_t> seeds{kDefaultSeeds.begin(), kDefaultSeeds.end()};
  TrainConfig train;  // approach and seed are set per run
  double cross_context_fraction = kDefaultCrossContextFraction;
  std::size_t workers = 1;
  RboOptions rbo;
};

void validate(const ScenarioSpec& spec);
void to_json(json& j, const ScenarioSpec& spec);
void from_json(const json& j, ScenarioSpec& spec);

struct Datasets {
  std::optional<DatasetSplit> dm;
  std::optional<DatasetSplit> dg;
  std::vector<RankedCandidateSet> dm_rankings;  // ground truth for RBO; may be empty
};

/// Training pairs for one seed: the scenario's source data plus
/// cross-context pairs.
std::vector<PreferencePair> scenario_training_pairs(const ScenarioSpec& spec, const Datasets& data,
                                                    std::uint64_t seed);

struct ScenarioReport {
  std::string scenario;
  std::optional<double> da_ratio;
  std::size_t test_pairs = 0;
  std::map<std::uint64_t, std::size_t> train_pairs;  // per seed
  std::vector<TrainReport> training;                 // ordered by approach, then seed
  std::vector<ApproachEvaluation> runs;              // ordered by approach, then seed
  std::map<std::string, SeedSummary> accuracy;       // keyed by approach name
  std::map<std::string, SeedSummary> mean_rbo;
  json spec;
};

void to_json(json& j, const ScenarioReport& r);
void from_json(const json& j, ScenarioReport& r);

using PredictionTable = std::map<Approach, std::map<std::uint64_t, std::vector<PairwisePrediction>>>;

struct ScenarioResult {
  ScenarioReport report;
  PredictionTable predictions;  // DM test predictions per approach and seed
};

/// Trains every (approach, seed) run, evaluates on the DM test split and
/// builds the ensemble from the four approach predictions of each seed.
ScenarioResult run_scenario(const ScenarioSpec& spec, const Datasets& data);

/// Majority-vote ensemble over aligned per-approach predictions, with margin
/// scales fitted on those same predictions.
std::vector<PairwisePrediction> ensemble_predictions(const std::map<Approach, std::vector<PairwisePrediction>>& by_approach);

// ---------------------------------------------------------------------------
// Plot-ready CSV: one row per (scenario, approach).

struct SummaryRow {
  std::string scenario;
  std::string approach;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
  std::string plot_kind;  // "line" for DM->DM, "bar" otherwise
};

std::vector<SummaryRow> summary_rows(const ScenarioReport& report);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> parse_summary_csv(const std::string& text);

/// Writes report.json, accuracy.csv, rbo_cases.jsonl, manifest.json and
/// predictions/<approach>-seed<k>.jsonl under `dir`.
void write_scenario_outputs(const std::filesystem::path& dir, const ScenarioResult& result);

std::filesystem::path prediction_file(const std::filesystem::path& dir, Approach approach, std::uint64_t seed);

/// Recomputes the ensemble accuracy of one seed from the four stored
/// per-approach prediction files.
double recompute_ensemble_accuracy(const std::filesystem::path& dir, std::uint64_t seed,
                                   const std::vector<PreferencePair>& test);

// ---------------------------------------------------------------------------

inline const std::vector<double> kDefaultRatios = {0.05, 0.10, 0.25, 0.50, 0.75, 1.00};

struct RatioRow {
  double ratio = 0.0;
  std::string approach;
  SeedSummary accuracy;
};

struct RatioSweepReport {
  std::vector<RatioRow> rows;  // ordered by approach, then ratio
  std::vector<ScenarioReport> scenarios;
};

void to_json(json& j, const RatioSweepReport& r);

/// Runs DA->DM once per ratio. The DM subsets are nested across ratios for
/// a given seed.
RatioSweepReport ratio_sweep(const std::vector<double>& ratios, const ScenarioSpec& spec, const Datasets& data);
std::string ratio_csv(const RatioSweepReport& report);

struct CriteriaDeltaRow {
  std::string approach;
  std::string model_config;  // "all" or one provider name
  std::vector<double> accuracy;  // one entry per criteria set
  std::vector<double> delta;     // accuracy[k] - accuracy[0]
};

struct CriteriaSweepReport {
  std::vector<std::string> criteria_sets;  // comma-joined names
  std::vector<std::string> model_configs;
  std::vector<CriteriaDeltaRow> rows;
  std::vector<json> variants;  // DG build manifests
};

void to_json(json& j, const CriteriaSweepReport& r);

/// Builds one DG variant per criteria set (through `providers`) and trains
/// DG->DM on it, once on all providers and once per provider.
CriteriaSweepReport criteria_sweep(const std::vector<CriterionSet>& criteria_sets, const ScenarioSpec& spec,
                                   const std::vector<ComprehensionItem>& items,
                                   const std::vector<std::shared_ptr<CompletionProvider>>& providers,
                                   const Datasets& data, std::uint64_t seed, const DgBuildOptions& options = {});

std::string criteria_csv(const CriteriaSweepReport& report);

}  // namespace feedrank
