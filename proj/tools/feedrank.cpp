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

// Command-line front end for building datasets, training, evaluating and
// serving the annotation API.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "feedrank/annotate.hpp"
#include "feedrank/harness.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/pairbuilder.hpp"
#include "feedrank/rankeval.hpp"
#include "feedrank/ranklearn.hpp"
#include "feedrank/rng.hpp"
#include "feedrank/scenario.hpp"
#include "feedrank/synth.hpp"

namespace fs = std::filesystem;
using namespace feedrank;

namespace {

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// A dataset directory or a single pairs JSONL file.
DatasetSplit load_pairs_input(const fs::path& path) {
  if (fs::is_directory(path)) return load_split(path);
  DatasetSplit s;
  s.train = load_jsonl<PreferencePair>(path);
  return s;
}

std::vector<PreferencePair> test_pairs(const fs::path& path) {
  if (fs::is_directory(path)) return load_split(path).test;
  return load_jsonl<PreferencePair>(path);
}

struct TrainFlags {
  double lr = TrainConfig{}.learning_rate;
  std::size_t batch = TrainConfig{}.batch_size;
  std::size_t epochs = TrainConfig{}.epochs;
  std::size_t max_len = TrainConfig{}.max_sequence_length;
  double beta = TrainConfig{}.dpo_beta;
  std::uint32_t dimension = kDefaultFeatureDimension;
  std::size_t hidden = 0;
  std::string config_file;

  void add(CLI::App* app) {
    app->add_option("--lr", lr, "Learning rate")->capture_default_str();
    app->add_option("--batch-size", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--max-seq-len", max_len, "Feedback character cap")->capture_default_str();
    app->add_option("--beta", beta, "DPO beta")->capture_default_str();
    app->add_option("--dimension", dimension, "Hashed feature dimension (power of two)")->capture_default_str();
    app->add_option("--hidden", hidden, "Hidden units of the scalar scorer (0 = linear)")->capture_default_str();
    app->add_option("--config", config_file, "TrainConfig JSON; flags given explicitly still apply");
  }

  TrainConfig build(CLI::App* app) const {
    TrainConfig c;
    if (!config_file.empty()) c = load_json_file(config_file).get<TrainConfig>();
    auto given = [&](const char* flag) { return config_file.empty() || app->count(flag) > 0; };
    if (given("--lr")) c.learning_rate = lr;
    if (given("--batch-size")) c.batch_size = batch;
    if (given("--epochs")) c.epochs = epochs;
    if (given("--max-seq-len")) c.max_sequence_length = max_len;
    if (given("--beta")) c.dpo_beta = beta;
    if (given("--dimension")) c.scalar.dimension = dimension;
    if (given("--hidden")) c.scalar.hidden = hidden;
    return c;
  }
};

struct ScenarioFlags {
  std::string dm, dg, rankings;
  std::string seeds = "0,42,500,1000,1234";
  std::string approaches = "classifier,reward,dpo,ranknet,ensemble";
  double cross_context = kDefaultCrossContextFraction;
  std::size_t workers = 1;
  double persistence = 0.0;

  void add(CLI::App* app) {
    app->add_option("--dm", dm, "DM dataset directory");
    app->add_option("--dg", dg, "DG dataset directory");
    app->add_option("--rankings", rankings, "Ground-truth ranked sets (JSONL) for RBO");
    app->add_option("--seeds", seeds, "Comma-separated seeds")->capture_default_str();
    app->add_option("--approaches", approaches, "Comma-separated approaches")->capture_default_str();
    app->add_option("--cross-context", cross_context, "Cross-context pair fraction")->capture_default_str();
    app->add_option("--workers", workers, "Concurrent training runs")->capture_default_str();
    app->add_option("--rbo-persistence", persistence, "Use extrapolated RBO with this persistence");
  }

  ScenarioSpec spec(const TrainConfig& train) const {
    ScenarioSpec s;
    s.seeds.clear();
    for (const auto& v : split_list(seeds)) s.seeds.push_back(std::stoull(v));
    s.approaches.clear();
    for (const auto& a : split_list(approaches)) s.approaches.push_back(approach_from_name(a));
    s.train = train;
    s.cross_context_fraction = cross_context;
    s.workers = workers;
    if (persistence > 0.0) {
      s.rbo.variant = RboOptions::Variant::Extrapolated;
      s.rbo.persistence = persistence;
    }
    return s;
  }

  Datasets datasets() const {
    Datasets d;
    if (!dm.empty()) d.dm = load_split(dm);
    if (!dg.empty()) d.dg = load_split(dg);
    if (!rankings.empty()) d.dm_rankings = load_jsonl<RankedCandidateSet>(rankings);
    return d;
  }
};

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::atomic<AnnotationServer*> g_server{nullptr};

void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feedrank: preference data, ranking models and evaluation for tutoring feedback"};
  app.require_subcommand(1);

  // build-pairs
  std::string bp_input, bp_out;
  double bp_fraction = 0.9;
  std::uint64_t bp_seed = 0;
  auto* bp = app.add_subcommand("build-pairs", "Expand ranked candidate sets into a DM pair split");
  bp->add_option("--input", bp_input, "Ranked candidate sets (JSONL)")->required();
  bp->add_option("--out", bp_out, "Output dataset directory")->required();
  bp->add_option("--train-fraction", bp_fraction)->capture_default_str();
  bp->add_option("--seed", bp_seed)->capture_default_str();

  // convert-mctest
  std::string mc_tsv, mc_ans, mc_out;
  auto* mc = app.add_subcommand("convert-mctest", "Convert MCTest TSV and answer files to items JSONL");
  mc->add_option("--tsv", mc_tsv)->required();
  mc->add_option("--answers", mc_ans)->required();
  mc->add_option("--out", mc_out)->required();

  // gen-dg
  std::string dg_items, dg_providers, dg_criteria = "all", dg_out, dg_audit;
  std::uint64_t dg_seed = 0;
  std::size_t dg_inflight = 4;
  double dg_fraction = 0.9;
  auto* gdg = app.add_subcommand("gen-dg", "Generate criteria-conditioned feedback pairs (DG)");
  gdg->add_option("--items", dg_items, "Comprehension items (JSONL)")->required();
  gdg->add_option("--providers", dg_providers, "Provider configuration (JSON)")->required();
  gdg->add_option("--criteria", dg_criteria, "Criteria list or 'all'")->capture_default_str();
  gdg->add_option("--seed", dg_seed)->capture_default_str();
  gdg->add_option("--max-in-flight", dg_inflight)->capture_default_str();
  gdg->add_option("--train-fraction", dg_fraction)->capture_default_str();
  gdg->add_option("--audit", dg_audit, "Append provider calls to this JSONL file");
  gdg->add_option("--out", dg_out)->required();

  // mix
  std::string mix_dg, mix_dm, mix_out;
  double mix_ratio = 0.0;
  std::uint64_t mix_seed = 0;
  auto* mx = app.add_subcommand("mix", "Augment DG with a DM subset (DA)");
  mx->add_option("--dg", mix_dg)->required();
  mx->add_option("--dm", mix_dm)->required();
  mx->add_option("--ratio", mix_ratio)->required();
  mx->add_option("--seed", mix_seed)->capture_default_str();
  mx->add_option("--out", mix_out)->required();

  // train
  std::string tr_data, tr_out, tr_approach = "reward";
  std::uint64_t tr_seed = 0;
  double tr_cross = kDefaultCrossContextFraction;
  TrainFlags tr_flags;
  auto* tr = app.add_subcommand("train", "Train one ranking model");
  tr->add_option("--data", tr_data, "Dataset directory or pairs JSONL")->required();
  tr->add_option("--approach", tr_approach)->capture_default_str();
  tr->add_option("--seed", tr_seed)->capture_default_str();
  tr->add_option("--cross-context", tr_cross)->capture_default_str();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr_flags.add(tr);

  // predict
  std::string pr_model, pr_pairs, pr_out;
  auto* pr = app.add_subcommand("predict", "Pairwise predictions for a pair set");
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--pairs", pr_pairs, "Dataset directory (test split) or pairs JSONL")->required();
  pr->add_option("--out", pr_out)->required();

  // eval
  std::string ev_preds, ev_pairs, ev_model, ev_rankings, ev_out;
  auto* ev = app.add_subcommand("eval", "Accuracy and RBO for stored predictions");
  ev->add_option("--predictions", ev_preds)->required();
  ev->add_option("--pairs", ev_pairs, "Dataset directory (test split) or pairs JSONL")->required();
  ev->add_option("--model", ev_model, "Checkpoint used to aggregate rankings");
  ev->add_option("--rankings", ev_rankings, "Ground-truth ranked sets (JSONL)");
  ev->add_option("--out", ev_out, "eval_report.json path");

  // rbo
  std::string rb_gt, rb_pred;
  double rb_p = 0.0;
  auto* rb = app.add_subcommand("rbo", "Rank-biased overlap of two comma-separated lists");
  rb->add_option("--gt", rb_gt)->required();
  rb->add_option("--pred", rb_pred)->required();
  rb->add_option("--persistence", rb_p, "Use the extrapolated variant with this persistence");

  // run
  std::string run_scenario_name = "DM->DM", run_out;
  std::optional<double> run_ratio;
  ScenarioFlags run_flags;
  TrainFlags run_train;
  auto* rn = app.add_subcommand("run", "Run one training scenario over a seed sweep");
  rn->add_option("--scenario", run_scenario_name)->capture_default_str();
  rn->add_option("--da-ratio", run_ratio);
  rn->add_option("--out", run_out)->required();
  run_flags.add(rn);
  run_train.add(rn);

  // sweep-ratio
  std::string sr_ratios = "0.05,0.10,0.25,0.50,0.75,1.00", sr_out;
  ScenarioFlags sr_flags;
  TrainFlags sr_train;
  auto* sr = app.add_subcommand("sweep-ratio", "DA->DM accuracy across DM ratios");
  sr->add_option("--ratios", sr_ratios)->capture_default_str();
  sr->add_option("--out", sr_out)->required();
  sr_flags.add(sr);
  sr_train.add(sr);

  // sweep-criteria
  std::string sc_items, sc_providers, sc_sets = "correct,revealing;all", sc_out;
  std::uint64_t sc_seed = 0;
  ScenarioFlags sc_flags;
  TrainFlags sc_train;
  auto* sc = app.add_subcommand("sweep-criteria", "DG->DM accuracy across generation criteria sets");
  sc->add_option("--items", sc_items)->required();
  sc->add_option("--providers", sc_providers)->required();
  sc->add_option("--criteria-sets", sc_sets, "Semicolon-separated criteria sets")->capture_default_str();
  sc->add_option("--generation-seed", sc_seed)->capture_default_str();
  sc->add_option("--out", sc_out)->required();
  sc_flags.add(sc);
  sc_train.add(sc);

  // synth
  SyntheticOptions sy_opts;
  std::string sy_out;
  auto* sy = app.add_subcommand("synth", "Write the synthetic benchmark");
  sy->add_option("--n-prompts", sy_opts.n_prompts)->capture_default_str();
  sy->add_option("--seed", sy_opts.seed)->capture_default_str();
  sy->add_option("--eta", sy_opts.eta)->capture_default_str();
  sy->add_option("--dg-pairs-per-prompt", sy_opts.dg_pairs_per_prompt)->capture_default_str();
  sy->add_option("--out", sy_out)->required();

  // validate
  std::string va_kind, va_input, va_expect;
  auto* va = app.add_subcommand("validate", "Validate records or a dataset directory");
  va->add_option("--kind", va_kind, "prompts|candidates|ranked|pairs|items|dataset")->required();
  va->add_option("--input", va_input)->required();
  va->add_option("--expect", va_expect, "For datasets: dm, dg or TRAIN:TEST counts");

  // annotate-serve
  ServerOptions as_opts;
  std::string as_dir, as_static;
  auto* as = app.add_subcommand("annotate-serve", "Serve the annotation HTTP API");
  as->add_option("--data-dir", as_dir, "Directory with tasks.jsonl and the journal")->required();
  as->add_option("--host", as_opts.host)->capture_default_str();
  as->add_option("--port", as_opts.port)->capture_default_str();
  as->add_option("--static", as_static, "UI bundle directory mounted at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*bp) {
      std::vector<PreferencePair> pairs;
      const auto sets = load_jsonl<RankedCandidateSet>(bp_input);
      for (const auto& s : sets) {
        const auto p = pairs_from_ranking(s);
        pairs.insert(pairs.end(), p.begin(), p.end());
      }
      const DatasetSplit split = split_by_prompt(pairs, bp_fraction, bp_seed, DatasetName::dm());
      save_split(bp_out, split, json{{"source", bp_input}, {"sets", sets.size()}, {"seed", bp_seed}});
      print_json(manifest_for(split));
    } else if (*mc) {
      const auto items = convert_mctest(mc_tsv, mc_ans);
      write_jsonl(mc_out, items);
      print_json(json{{"items", items.size()}, {"out", mc_out}});
    } else if (*gdg) {
      const auto items = load_jsonl<ComprehensionItem>(dg_items);
      const auto providers = load_providers(dg_providers);
      std::unique_ptr<AuditLog> audit = dg_audit.empty() ? std::make_unique<AuditLog>()
                                                         : std::make_unique<AuditLog>(fs::path(dg_audit));
      DgBuildOptions opts;
      opts.train_fraction = dg_fraction;
      opts.max_in_flight = dg_inflight;
      opts.generation.audit = audit.get();
      const DgBuildResult r = build_dg(items, providers, CriterionSet::parse(dg_criteria), dg_seed, opts);
      json extra = r.manifest;
      extra["skipped"] = r.skipped;
      save_split(dg_out, r.split, extra);
      print_json(json{{"pairs", r.pair_count}, {"skipped", r.skipped.size()}, {"out", dg_out}});
    } else if (*mx) {
      const MixSpec spec{load_split(mix_dg), load_split(mix_dm), mix_ratio, mix_seed};
      const DatasetSplit out = mix(spec);
      save_split(mix_out, out, json{{"mix", mix_report(spec)}, {"dg", mix_dg}, {"dm", mix_dm}});
      print_json(mix_report(spec));
    } else if (*tr) {
      TrainConfig cfg = tr_flags.build(tr);
      cfg.approach = approach_from_name(tr_approach);
      cfg.seed = tr_seed;
      auto pairs = load_pairs_input(tr_data).train;
      if (tr_cross > 0.0) pairs = add_cross_context_pairs(pairs, tr_cross, derive_seed(tr_seed, 0xc0));
      const TrainResult r = train(pairs, cfg);
      save_checkpoint(tr_out, r.model);
      print_json(r.report);
    } else if (*pr) {
      const Model model = load_checkpoint(pr_model);
      ScoringCache cache(model);
      std::vector<json> rows;
      for (const auto& p : test_pairs(pr_pairs)) rows.push_back(predict_pair(model, p, &cache));
      write_jsonl(pr_out, rows);
      print_json(json{{"predictions", rows.size()}, {"out", pr_out}});
    } else if (*ev) {
      std::vector<PairwisePrediction> preds;
      for (const auto& row : load_jsonl<json>(ev_preds)) preds.push_back(row.get<PairwisePrediction>());
      const auto pairs = test_pairs(ev_pairs);
      std::optional<Model> model;
      if (!ev_model.empty()) model = load_checkpoint(ev_model);
      std::vector<RankedCandidateSet> truth;
      if (!ev_rankings.empty()) {
        if (!model) throw PreconditionError("--rankings needs --model to aggregate rankings");
        truth = load_jsonl<RankedCandidateSet>(ev_rankings);
      }
      const Approach approach = preds.empty() ? Approach::Reward : preds.front().approach;
      const PairScorer scorer = model ? model_scorer(*model) : PairScorer{};
      const ApproachEvaluation e = evaluate_scenario(approach, model ? model->config.seed : 0, preds, pairs, truth, scorer);
      if (!ev_out.empty()) {
        write_json_file(ev_out, e);
        std::vector<json> cases(e.cases.begin(), e.cases.end());
        write_jsonl(fs::path(ev_out).parent_path() / "rbo_cases.jsonl", cases);
      }
      print_json(json{{"accuracy", e.accuracy}, {"pairs", e.pairs}, {"mean_rbo", e.mean_rbo ? json(*e.mean_rbo) : json()}});
    } else if (*rb) {
      RboOptions o;
      if (rb_p > 0.0) {
        o.variant = RboOptions::Variant::Extrapolated;
        o.persistence = rb_p;
      }
      const auto gt = split_list(rb_gt), pred = split_list(rb_pred);
      print_json(json{{"rbo", rbo(gt, pred, o)}, {"agreement", overlap_agreements(gt, pred)}});
    } else if (*rn) {
      ScenarioSpec spec = run_flags.spec(run_train.build(rn));
      spec.kind = scenario_from_name(run_scenario_name);
      spec.da_ratio = run_ratio;
      const ScenarioResult r = run_scenario(spec, run_flags.datasets());
      write_scenario_outputs(run_out, r);
      print_json(r.report.accuracy);
    } else if (*sr) {
      std::vector<double> ratios;
      for (const auto& v : split_list(sr_ratios)) ratios.push_back(std::stod(v));
      const RatioSweepReport r = ratio_sweep(ratios, sr_flags.spec(sr_train.build(sr)), sr_flags.datasets());
      fs::create_directories(sr_out);
      write_json_file(fs::path(sr_out) / "ratio_sweep.json", r);
      write_text_file(fs::path(sr_out) / "ratio_sweep.csv", ratio_csv(r));
      std::cout << ratio_csv(r);
    } else if (*sc) {
      std::vector<CriterionSet> sets;
      for (const auto& s : split_list(sc_sets, ';')) sets.push_back(CriterionSet::parse(s));
      const CriteriaSweepReport r =
          criteria_sweep(sets, sc_flags.spec(sc_train.build(sc)), load_jsonl<ComprehensionItem>(sc_items),
                         load_providers(sc_providers), sc_flags.datasets(), sc_seed);
      fs::create_directories(sc_out);
      write_json_file(fs::path(sc_out) / "criteria_sweep.json", r);
      write_text_file(fs::path(sc_out) / "criteria_sweep.csv", criteria_csv(r));
      std::cout << criteria_csv(r);
    } else if (*sy) {
      const SyntheticBenchmark b = make_synthetic_benchmark(sy_opts);
      const fs::path out(sy_out);
      save_split(out / "dm", b.dm, b.manifest);
      save_split(out / "dg", b.dg, b.manifest);
      write_jsonl(out / "rankings.jsonl", b.rankings);
      write_json_file(out / "manifest.json", b.manifest);
      print_json(b.manifest);
    } else if (*va) {
      std::size_t n = 0;
      if (va_kind == "prompts") {
        n = load_jsonl<TutoringPrompt>(va_input).size();
      } else if (va_kind == "candidates") {
        n = load_jsonl<FeedbackCandidate>(va_input).size();
      } else if (va_kind == "ranked") {
        n = load_jsonl<RankedCandidateSet>(va_input).size();
      } else if (va_kind == "pairs") {
        n = load_jsonl<PreferencePair>(va_input).size();
      } else if (va_kind == "items") {
        n = load_jsonl<ComprehensionItem>(va_input).size();
      } else if (va_kind == "dataset") {
        const DatasetSplit split = load_split(va_input);
        ExpectedCounts expected{split.train.size(), split.test.size()};
        if (va_expect == "dm") {
          expected = ExpectedCounts::published_dm();
        } else if (va_expect == "dg") {
          expected = ExpectedCounts::published_dg();
        } else if (!va_expect.empty()) {
          const auto parts = split_list(va_expect, ':');
          if (parts.size() != 2) throw ValidationError("expect", "invalid field expect: use dm, dg or TRAIN:TEST");
          expected = {std::stoul(parts[0]), std::stoul(parts[1])};
        }
        const StatsReport report = validate_stats(split, expected);
        for (const auto& line : report.lines()) std::cout << line << "\n";
        return report.all_match() && report.leaked_prompt_ids.empty() ? 0 : 3;
      } else {
        throw ValidationError("kind", "invalid field kind: '" + va_kind + "'");
      }
      print_json(json{{"kind", va_kind}, {"records", n}, {"valid", true}});
    } else if (*as) {
      if (!as_static.empty()) as_opts.static_dir = fs::path(as_static);
      AnnotationStore store(as_dir);
      AnnotationServer server(store, as_opts);
      const int port = server.bind();
      std::cout << json{{"listening", as_opts.host + ":" + std::to_string(port)}, {"tasks", store.size()}}.dump()
                << std::endl;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.serve();
      g_server = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", e.code()}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
