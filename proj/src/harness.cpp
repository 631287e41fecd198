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

#include "feedrank/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "feedrank/error.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/pairbuilder.hpp"
#include "feedrank/rng.hpp"

namespace feedrank {
namespace {

constexpr std::uint64_t kCrossContextSalt = 0xc0;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError(line, "bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the
/// failure of the lowest index.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<Approach> trained_approaches(const ScenarioSpec& spec) {
  const bool ensemble =
      std::find(spec.approaches.begin(), spec.approaches.end(), Approach::Ensemble) != spec.approaches.end();
  std::vector<Approach> out;
  for (Approach a : kTrainableApproaches) {
    if (ensemble || std::find(spec.approaches.begin(), spec.approaches.end(), a) != spec.approaches.end()) {
      out.push_back(a);
    }
  }
  return out;
}

bool requested(const ScenarioSpec& spec, Approach a) {
  return std::find(spec.approaches.begin(), spec.approaches.end(), a) != spec.approaches.end();
}

}  // namespace

std::string_view scenario_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::DmToDm: return "DM->DM";
    case ScenarioKind::DgToDm: return "DG->DM";
    case ScenarioKind::DaToDm: return "DA->DM";
  }
  return "DM->DM";
}

ScenarioKind scenario_from_name(std::string_view name) {
  std::string n(name);
  const std::string arrow = "\xe2\x86\x92";
  if (const auto pos = n.find(arrow); pos != std::string::npos) n.replace(pos, arrow.size(), "->");
  for (auto& c : n) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (ScenarioKind k : {ScenarioKind::DmToDm, ScenarioKind::DgToDm, ScenarioKind::DaToDm}) {
    if (scenario_name(k) == n) return k;
  }
  throw ValidationError("scenario", "invalid field scenario: unknown scenario '" + std::string(name) + "'");
}

void validate(const ScenarioSpec& spec) {
  if (spec.kind == ScenarioKind::DaToDm) {
    if (!spec.da_ratio) throw ValidationError("da_ratio", "invalid field da_ratio: required for DA->DM");
    if (!(*spec.da_ratio >= 0.0 && *spec.da_ratio <= 1.0)) {
      throw ValidationError("da_ratio", "invalid field da_ratio: must lie in [0, 1]");
    }
  }
  if (spec.seeds.empty()) throw ValidationError("seeds", "invalid field seeds: must be non-empty");
  if (spec.approaches.empty()) throw ValidationError("approaches", "invalid field approaches: must be non-empty");
  if (!(spec.cross_context_fraction >= 0.0 && spec.cross_context_fraction <= 1.0)) {
    throw ValidationError("cross_context_fraction", "invalid field cross_context_fraction: must lie in [0, 1]");
  }
  std::set<std::uint64_t> seen(spec.seeds.begin(), spec.seeds.end());
  if (seen.size() != spec.seeds.size()) throw ValidationError("seeds", "invalid field seeds: duplicate seed");
  TrainConfig probe = spec.train;
  probe.approach = Approach::Reward;
  validate(probe);
}

void to_json(json& j, const ScenarioSpec& spec) {
  std::vector<std::string> approaches;
  for (Approach a : spec.approaches) approaches.emplace_back(approach_name(a));
  TrainConfig train = spec.train;
  json tj = train;
  tj.erase("approach");
  tj.erase("seed");
  j = json{{"scenario", scenario_name(spec.kind)},
           {"da_ratio", spec.da_ratio ? json(*spec.da_ratio) : json(nullptr)},
           {"approaches", approaches},
           {"seeds", spec.seeds},
           {"train", tj},
           {"cross_context_fraction", spec.cross_context_fraction},
           {"workers", spec.workers},
           {"rbo",
            {{"variant", spec.rbo.variant == RboOptions::Variant::AverageOverlap ? "average_overlap" : "extrapolated"},
             {"persistence", spec.rbo.persistence}}}};
}

void from_json(const json& j, ScenarioSpec& spec) {
  ScenarioSpec d;
  spec.kind = scenario_from_name(j.value("scenario", std::string(scenario_name(d.kind))));
  spec.da_ratio.reset();
  if (j.contains("da_ratio") && !j["da_ratio"].is_null()) spec.da_ratio = j["da_ratio"].get<double>();
  spec.approaches = d.approaches;
  if (j.contains("approaches")) {
    spec.approaches.clear();
    for (const auto& a : j["approaches"]) spec.approaches.push_back(approach_from_name(a.get<std::string>()));
  }
  spec.seeds = j.value("seeds", d.seeds);
  spec.train = j.contains("train") ? j["train"].get<TrainConfig>() : d.train;
  spec.cross_context_fraction = j.value("cross_context_fraction", d.cross_context_fraction);
  spec.workers = j.value("workers", d.workers);
  spec.rbo = d.rbo;
  if (j.contains("rbo")) {
    const std::string variant = j["rbo"].value("variant", std::string("average_overlap"));
    if (variant != "average_overlap" && variant != "extrapolated") {
      throw ValidationError("rbo.variant", "invalid field rbo.variant: '" + variant + "'");
    }
    spec.rbo.variant =
        variant == "extrapolated" ? RboOptions::Variant::Extrapolated : RboOptions::Variant::AverageOverlap;
    spec.rbo.persistence = j["rbo"].value("persistence", d.rbo.persistence);
  }
}

std::vector<PreferencePair> scenario_training_pairs(const ScenarioSpec& spec, const Datasets& data,
                                                    std::uint64_t seed) {
  auto need = [](const std::optional<DatasetSplit>& split, const char* name) -> const DatasetSplit& {
    if (!split) throw NotFoundError(std::string("missing dataset ") + name);
    return *split;
  };
  std::vector<PreferencePair> base;
  switch (spec.kind) {
    case ScenarioKind::DmToDm: base = need(data.dm, "DM").train; break;
    case ScenarioKind::DgToDm: base = need(data.dg, "DG").train; break;
    case ScenarioKind::DaToDm:
      base = mix(MixSpec{need(data.dg, "DG"), need(data.dm, "DM"), *spec.da_ratio, seed}).train;
      break;
  }
  if (base.empty()) throw PreconditionError("scenario " + std::string(scenario_name(spec.kind)) + " has no training pairs");
  if (spec.cross_context_fraction == 0.0) return base;
  return add_cross_context_pairs(base, spec.cross_context_fraction, derive_seed(seed, kCrossContextSalt));
}

std::vector<PairwisePrediction> ensemble_predictions(
    const std::map<Approach, std::vector<PairwisePrediction>>& by_approach) {
  std::map<Approach, std::vector<double>> margins;
  std::map<Approach, std::unordered_map<std::string, const PairwisePrediction*>> index;
  for (Approach a : kTrainableApproaches) {
    const auto it = by_approach.find(a);
    if (it == by_approach.end()) {
      throw PreconditionError("ensemble needs predictions from " + std::string(approach_name(a)));
    }
    for (const auto& p : it->second) {
      margins[a].push_back(p.margin);
      index[a][p.pair_id] = &p;
    }
  }
  const MarginScales scales = fit_margin_scales(margins);
  std::vector<PairwisePrediction> out;
  for (const auto& lead : by_approach.at(kTrainableApproaches[0])) {
    std::vector<PairwisePrediction> votes;
    for (Approach a : kTrainableApproaches) {
      const auto it = index[a].find(lead.pair_id);
      if (it == index[a].end()) {
        throw NotFoundError(std::string(approach_name(a)) + " has no prediction for pair " + lead.pair_id);
      }
      votes.push_back(*it->second);
    }
    out.push_back(ensemble_vote(votes, scales));
  }
  return out;
}

ScenarioResult run_scenario(const ScenarioSpec& spec, const Datasets& data) {
  validate(spec);
  if (!data.dm) throw NotFoundError("missing dataset DM (test split)");
  const std::vector<PreferencePair>& test = data.dm->test;
  if (test.empty()) throw PreconditionError("DM test split is empty");

  std::map<std::uint64_t, std::vector<PreferencePair>> train_pairs;
  for (auto seed : spec.seeds) train_pairs[seed] = scenario_training_pairs(spec, data, seed);

  struct Run {
    Approach approach;
    std::uint64_t seed;
    std::shared_ptr<Model> model;
    TrainReport report;
    std::vector<PairwisePrediction> predictions;
    ApproachEvaluation evaluation;
  };
  std::vector<Run> runs;
  for (Approach a : trained_approaches(spec)) {
    for (auto seed : spec.seeds) runs.push_back(Run{a, seed, nullptr, {}, {}, {}});
  }

  parallel_for(runs.size(), spec.workers, [&](std::size_t i) {
    Run& run = runs[i];
    TrainConfig cfg = spec.train;
    cfg.approach = run.approach;
    cfg.seed = run.seed;
    TrainResult trained = train(train_pairs.at(run.seed), cfg);
    run.model = std::make_shared<Model>(std::move(trained.model));
    run.report = std::move(trained.report);
    run.predictions.reserve(test.size());
    ScoringCache cache(*run.model);
    for (const auto& pair : test) run.predictions.push_back(predict_pair(*run.model, pair, &cache));
    run.evaluation = evaluate_scenario(run.approach, run.seed, run.predictions, test, data.dm_rankings,
                                       model_scorer(*run.model), spec.rbo);
  });

  ScenarioResult result;
  ScenarioReport& report = result.report;
  report.scenario = std::string(scenario_name(spec.kind));
  report.da_ratio = spec.kind == ScenarioKind::DaToDm ? spec.da_ratio : std::nullopt;
  report.test_pairs = test.size();
  for (const auto& [seed, pairs] : train_pairs) report.train_pairs[seed] = pairs.size();
  json sj = spec;
  sj.erase("workers");
  report.spec = sj;

  std::map<std::string, std::vector<double>> acc, rbo_means;
  for (auto& run : runs) {
    result.predictions[run.approach][run.seed] = run.predictions;
    if (!requested(spec, run.approach)) continue;
    report.training.push_back(run.report);
    const std::string name(approach_name(run.approach));
    acc[name].push_back(run.evaluation.accuracy);
    if (run.evaluation.mean_rbo) rbo_means[name].push_back(*run.evaluation.mean_rbo);
    report.runs.push_back(std::move(run.evaluation));
  }

  if (requested(spec, Approach::Ensemble)) {
    std::vector<ApproachEvaluation> ensemble_evals(spec.seeds.size());
    parallel_for(spec.seeds.size(), spec.workers, [&](std::size_t k) {
      const std::uint64_t seed = spec.seeds[k];
      std::map<Approach, std::vector<PairwisePrediction>> by_approach;
      std::map<Approach, const Model*> models;
      std::map<Approach, std::vector<double>> margins;
      for (const auto& run : runs) {
        if (run.seed != seed) continue;
        by_approach[run.approach] = run.predictions;
        models[run.approach] = run.model.get();
        for (const auto& p : run.predictions) margins[run.approach].push_back(p.margin);
      }
      const auto votes = ensemble_predictions(by_approach);
      ensemble_evals[k] = evaluate_scenario(Approach::Ensemble, seed, votes, test, data.dm_rankings,
                                            ensemble_scorer(models, fit_margin_scales(margins)), spec.rbo);
    });
    for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
      std::map<Approach, std::vector<PairwisePrediction>> by_approach;
      for (Approach a : kTrainableApproaches) by_approach[a] = result.predictions.at(a).at(spec.seeds[k]);
      result.predictions[Approach::Ensemble][spec.seeds[k]] = ensemble_predictions(by_approach);
      acc["ensemble"].push_back(ensemble_evals[k].accuracy);
      if (ensemble_evals[k].mean_rbo) rbo_means["ensemble"].push_back(*ensemble_evals[k].mean_rbo);
      report.runs.push_back(std::move(ensemble_evals[k]));
    }
  }
  for (auto& [name, values] : acc) report.accuracy[name] = summarize(values);
  for (auto& [name, values] : rbo_means) report.mean_rbo[name] = summarize(values);
  return result;
}

void to_json(json& j, const ScenarioReport& r) {
  json train_pairs = json::object();
  for (const auto& [seed, n] : r.train_pairs) train_pairs[std::to_string(seed)] = n;
  j = json{{"scenario", r.scenario},
           {"da_ratio", r.da_ratio ? json(*r.da_ratio) : json(nullptr)},
           {"test_pairs", r.test_pairs},
           {"train_pairs", train_pairs},
           {"training", r.training},
           {"runs", r.runs},
           {"accuracy", r.accuracy},
           {"mean_rbo", r.mean_rbo},
           {"spec", r.spec}};
}

void from_json(const json& j, ScenarioReport& r) {
  r.scenario = j.at("scenario").get<std::string>();
  r.da_ratio.reset();
  if (!j.at("da_ratio").is_null()) r.da_ratio = j["da_ratio"].get<double>();
  r.test_pairs = j.at("test_pairs").get<std::size_t>();
  r.train_pairs.clear();
  for (const auto& [seed, n] : j.at("train_pairs").items()) r.train_pairs[std::stoull(seed)] = n.get<std::size_t>();
  r.training.clear();
  for (const auto& t : j.at("training")) {
    TrainReport tr;
    tr.approach = approach_from_name(t.at("approach").get<std::string>());
    tr.seed = t.at("seed").get<std::uint64_t>();
    tr.pairs = t.at("pairs").get<std::size_t>();
    tr.steps = t.at("steps").get<std::size_t>();
    tr.epoch_mean_loss = t.at("epoch_mean_loss").get<std::vector<double>>();
    r.training.push_back(std::move(tr));
  }
  r.runs = j.at("runs").get<std::vector<ApproachEvaluation>>();
  r.accuracy = j.at("accuracy").get<std::map<std::string, SeedSummary>>();
  r.mean_rbo = j.at("mean_rbo").get<std::map<std::string, SeedSummary>>();
  r.spec = j.at("spec");
}

// ---------------------------------------------------------------------------

std::vector<SummaryRow> summary_rows(const ScenarioReport& report) {
  std::vector<SummaryRow> rows;
  const std::string kind = report.scenario == "DM->DM" ? "line" : "bar";
  for (const auto& [name, s] : report.accuracy) rows.push_back({report.scenario, name, s.mean, s.stddev, s.values.size(), kind});
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "scenario,approach,mean,std,n,plot_kind\n";
  for (const auto& r : rows) {
    out += r.scenario + "," + r.approach + "," + format_double(r.mean) + "," + format_double(r.stddev) + "," +
           std::to_string(r.n) + "," + r.plot_kind + "\n";
  }
  return out;
}

std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::vector<SummaryRow> rows;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw ParseError(lineno, "expected 6 columns");
    rows.push_back({f[0], f[1], parse_double(f[2], lineno), parse_double(f[3], lineno),
                    static_cast<std::size_t>(parse_double(f[4], lineno)), f[5]});
  }
  return rows;
}

std::filesystem::path prediction_file(const std::filesystem::path& dir, Approach approach, std::uint64_t seed) {
  return dir / "predictions" / (std::string(approach_name(approach)) + "-seed" + std::to_string(seed) + ".jsonl");
}

void write_scenario_outputs(const std::filesystem::path& dir, const ScenarioResult& result) {
  std::filesystem::create_directories(dir / "predictions");
  write_json_file(dir / "report.json", result.report);
  write_text_file(dir / "accuracy.csv", summary_csv(summary_rows(result.report)));
  std::vector<json> cases;
  for (const auto& run : result.report.runs) {
    for (const auto& c : run.cases) {
      json row = c;
      row["approach"] = approach_name(run.approach);
      row["seed"] = run.seed;
      cases.push_back(std::move(row));
    }
  }
  write_jsonl(dir / "rbo_cases.jsonl", cases);
  std::vector<std::string> files;
  for (const auto& [approach, by_seed] : result.predictions) {
    for (const auto& [seed, preds] : by_seed) {
      std::vector<json> rows(preds.begin(), preds.end());
      const auto path = prediction_file(dir, approach, seed);
      write_jsonl(path, rows);
      files.push_back(std::filesystem::relative(path, dir).generic_string());
    }
  }
  write_json_file(dir / "manifest.json",
                  json{{"kind", "scenario-run"}, {"spec", result.report.spec}, {"prediction_files", files}});
}

double recompute_ensemble_accuracy(const std::filesystem::path& dir, std::uint64_t seed,
                                   const std::vector<PreferencePair>& test) {
  std::map<Approach, std::vector<PairwisePrediction>> by_approach;
  for (Approach a : kTrainableApproaches) {
    for (const auto& row : load_jsonl<json>(prediction_file(dir, a, seed))) {
      by_approach[a].push_back(row.get<PairwisePrediction>());
    }
  }
  return pairwise_accuracy(ensemble_predictions(by_approach), test);
}

// ---------------------------------------------------------------------------

void to_json(json& j, const RatioSweepReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) rows.push_back({{"ratio", row.ratio}, {"approach", row.approach}, {"accuracy", row.accuracy}});
  j = json{{"rows", rows}, {"scenarios", r.scenarios}};
}

RatioSweepReport ratio_sweep(const std::vector<double>& ratios, const ScenarioSpec& spec, const Datasets& data) {
  if (ratios.empty()) throw ValidationError("ratios", "invalid field ratios: must be non-empty");
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("ratios", "invalid field ratios: must lie in [0, 1]");
  }
  RatioSweepReport out;
  for (double r : ratios) {
    ScenarioSpec s = spec;
    s.kind = ScenarioKind::DaToDm;
    s.da_ratio = r;
    out.scenarios.push_back(run_scenario(s, data).report);
  }
  for (Approach a : spec.approaches) {
    const std::string name(approach_name(a));
    for (std::size_t k = 0; k < ratios.size(); ++k) {
      out.rows.push_back({ratios[k], name, out.scenarios[k].accuracy.at(name)});
    }
  }
  return out;
}

std::string ratio_csv(const RatioSweepReport& report) {
  std::string out = "ratio,approach,mean,std,n\n";
  for (const auto& r : report.rows) {
    out += format_double(r.ratio) + "," + r.approach + "," + format_double(r.accuracy.mean) + "," +
           format_double(r.accuracy.stddev) + "," + std::to_string(r.accuracy.values.size()) + "\n";
  }
  return out;
}

void to_json(json& j, const CriteriaSweepReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"approach", row.approach},
                    {"model_config", row.model_config},
                    {"accuracy", row.accuracy},
                    {"delta", row.delta}});
  }
  j = json{{"criteria_sets", r.criteria_sets}, {"model_configs", r.model_configs}, {"rows", rows}, {"variants", r.variants}};
}

CriteriaSweepReport criteria_sweep(const std::vector<CriterionSet>& criteria_sets, const ScenarioSpec& spec,
                                   const std::vector<ComprehensionItem>& items,
                                   const std::vector<std::shared_ptr<CompletionProvider>>& providers,
                                   const Datasets& data, std::uint64_t seed, const DgBuildOptions& options) {
  if (criteria_sets.empty()) throw ValidationError("criteria_sets", "invalid field criteria_sets: must be non-empty");
  for (const auto& c : criteria_sets) {
    if (c.empty()) throw ValidationError("criteria_sets", "invalid field criteria_sets: empty criteria set");
  }
  CriteriaSweepReport out;
  out.model_configs.push_back("all");
  for (const auto& p : providers) out.model_configs.push_back(p->name());

  // accuracy[(approach, config)][set]
  std::map<std::pair<std::string, std::string>, std::vector<double>> acc;
  for (const auto& criteria : criteria_sets) {
    std::string label;
    for (const auto& n : criteria.names()) label += (label.empty() ? "" : ",") + n;
    out.criteria_sets.push_back(label);
    DgBuildResult built = build_dg(items, providers, criteria, seed, options);
    out.variants.push_back(built.manifest);
    for (const auto& config : out.model_configs) {
      Datasets variant = data;
      variant.dg = built.split;
      if (config != "all") {
        auto keep = [&](const PreferencePair& p) { return p.chosen.provider.value_or("") != config; };
        std::erase_if(variant.dg->train, keep);
        std::erase_if(variant.dg->test, keep);
      }
      ScenarioSpec s = spec;
      s.kind = ScenarioKind::DgToDm;
      s.da_ratio.reset();
      const ScenarioReport report = run_scenario(s, variant).report;
      for (const auto& [name, summary] : report.accuracy) acc[{name, config}].push_back(summary.mean);
    }
  }
  for (Approach a : spec.approaches) {
    const std::string name(approach_name(a));
    for (const auto& config : out.model_configs) {
      CriteriaDeltaRow row{name, config, acc.at({name, config}), {}};
      for (double v : row.accuracy) row.delta.push_back(v - row.accuracy.front());
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

std::string criteria_csv(const CriteriaSweepReport& report) {
  std::string out = "approach,model_config,criteria_set,accuracy,delta\n";
  for (const auto& row : report.rows) {
    for (std::size_t k = 0; k < row.accuracy.size(); ++k) {
      out += row.approach + "," + row.model_config + ",\"" + report.criteria_sets[k] + "\"," +
             format_double(row.accuracy[k]) + "," + format_double(row.delta[k]) + "\n";
    }
  }
  return out;
}

}  // namespace feedrank
