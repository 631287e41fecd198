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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "feedrank/harness.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/pairbuilder.hpp"
#include "feedrank/rankeval.hpp"
#include "feedrank/ranklearn.hpp"
#include "feedrank/scenario.hpp"
#include "feedrank/synth.hpp"

namespace py = pybind11;
using namespace feedrank;

namespace {

// Values cross the boundary as JSON text through Python's json module.
json to_json_value(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

template <class T>
T from_py(const py::handle& obj) {
  return to_json_value(obj).get<T>();
}

template <class T>
std::vector<T> list_from_py(const py::handle& obj) {
  return to_json_value(obj).get<std::vector<T>>();
}

DatasetSplit split_from_py(const py::handle& obj) {
  const json j = to_json_value(obj);
  DatasetSplit s;
  s.train = j.at("train").get<std::vector<PreferencePair>>();
  s.test = j.value("test", std::vector<PreferencePair>{});
  if (j.contains("name")) s.name = DatasetName::parse(j["name"].get<std::string>());
  return s;
}

py::object split_to_py(const DatasetSplit& s) {
  return to_py(json{{"name", s.name.str()}, {"train", s.train}, {"test", s.test}});
}

}  // namespace

PYBIND11_MODULE(_feedrank, m) {
  m.doc() = "feedrank C++ core";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "FeedrankError", PyExc_ValueError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    PyObject* error = error_type.get_stored().ptr();
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error, (e.code() + ": " + e.what()).c_str());
    } catch (const json::exception& e) {
      PyErr_SetString(error, (std::string("json: ") + e.what()).c_str());
    }
  });

  m.def("validate", [](const std::string& kind, const py::object& record) {
    const json j = to_json_value(record);
    if (kind == "prompt") return to_py(j.get<TutoringPrompt>());
    if (kind == "candidate") return to_py(j.get<FeedbackCandidate>());
    if (kind == "ranked") return to_py(j.get<RankedCandidateSet>());
    if (kind == "pair") return to_py(j.get<PreferencePair>());
    if (kind == "item") return to_py(j.get<ComprehensionItem>());
    throw ValidationError("kind", "unknown record kind '" + kind + "'");
  }, py::arg("kind"), py::arg("record"), "Validate a record and return its normalised form.");

  m.def("compute_pair_id", &compute_pair_id, py::arg("prompt_id"), py::arg("chosen_text"), py::arg("rejected_text"));

  m.def("pairs_from_ranking", [](const py::object& ranked) {
    return to_py(pairs_from_ranking(from_py<RankedCandidateSet>(ranked)));
  }, py::arg("ranked"));

  m.def("add_cross_context_pairs", [](const py::object& pairs, double fraction, std::uint64_t seed) {
    return to_py(add_cross_context_pairs(list_from_py<PreferencePair>(pairs), fraction, seed));
  }, py::arg("pairs"), py::arg("fraction") = kDefaultCrossContextFraction, py::arg("seed") = 0);

  m.def("split_by_prompt", [](const py::object& pairs, double train_fraction, std::uint64_t seed, const std::string& name) {
    return split_to_py(split_by_prompt(list_from_py<PreferencePair>(pairs), train_fraction, seed, DatasetName::parse(name)));
  }, py::arg("pairs"), py::arg("train_fraction") = 0.9, py::arg("seed") = 0, py::arg("name") = "DM");

  m.def("mix", [](const py::object& dg, const py::object& dm, double ratio, std::uint64_t seed) {
    return split_to_py(mix(MixSpec{split_from_py(dg), split_from_py(dm), ratio, seed}));
  }, py::arg("dg"), py::arg("dm"), py::arg("ratio"), py::arg("seed") = 0);

  m.def("rbo", [](const std::vector<std::string>& gt, const std::vector<std::string>& pred, std::optional<double> p) {
    RboOptions o;
    if (p) {
      o.variant = RboOptions::Variant::Extrapolated;
      o.persistence = *p;
    }
    return rbo(gt, pred, o);
  }, py::arg("ground_truth"), py::arg("predicted"), py::arg("persistence") = py::none());

  m.def("overlap_agreements", &overlap_agreements, py::arg("a"), py::arg("b"));

  m.def("pairwise_accuracy", [](const py::object& predictions, const py::object& pairs) {
    const auto preds = list_from_py<PairwisePrediction>(predictions);
    const auto ps = list_from_py<PreferencePair>(pairs);
    return pairwise_accuracy(preds, ps);
  }, py::arg("predictions"), py::arg("pairs"));

  m.def("ensemble_vote", [](const py::object& predictions) {
    const auto preds = list_from_py<PairwisePrediction>(predictions);
    return to_py(ensemble_vote(preds));
  }, py::arg("predictions"));

  m.def("render_generation_prompt", [](const py::object& prompt, bool with_criteria, const std::string& criteria) {
    GenerationRequest req;
    req.prompt_template = with_criteria ? PromptTemplate::WithCriteria : PromptTemplate::WithoutCriteria;
    if (with_criteria) req.criteria = CriterionSet::parse(criteria);
    return render_generation_prompt(from_py<TutoringPrompt>(prompt), req);
  }, py::arg("prompt"), py::arg("with_criteria") = true, py::arg("criteria") = "all");

  m.def("make_synthetic_benchmark", [](std::size_t n_prompts, std::uint64_t seed, double eta) {
    SyntheticOptions o;
    o.n_prompts = n_prompts;
    o.seed = seed;
    o.eta = eta;
    const SyntheticBenchmark b = make_synthetic_benchmark(o);
    py::dict out;
    out["dm"] = split_to_py(b.dm);
    out["dg"] = split_to_py(b.dg);
    out["rankings"] = to_py(b.rankings);
    out["flipped_pair_ids"] = b.flipped_pair_ids;
    out["manifest"] = to_py(b.manifest);
    return out;
  }, py::arg("n_prompts") = 200, py::arg("seed") = 0, py::arg("eta") = 0.15);

  py::class_<Model>(m, "Model")
      .def_property_readonly("approach", [](const Model& model) { return std::string(approach_name(model.approach)); })
      .def_property_readonly("config", [](const Model& model) { return to_py(model.config); })
      .def("margin", [](const Model& model, const py::object& prompt, const std::string& first, const std::string& second) {
        return pair_margin(model, from_py<TutoringPrompt>(prompt), first, second);
      }, py::arg("prompt"), py::arg("first"), py::arg("second"))
      .def("predict", [](const Model& model, const py::object& pair) {
        return to_py(predict_pair(model, from_py<PreferencePair>(pair)));
      }, py::arg("pair"))
      .def("predict_all", [](const Model& model, const py::object& pairs) {
        ScoringCache cache(model);
        std::vector<PairwisePrediction> out;
        for (const auto& p : list_from_py<PreferencePair>(pairs)) out.push_back(predict_pair(model, p, &cache));
        return to_py(out);
      }, py::arg("pairs"))
      .def("checkpoint", [](const Model& model) { return to_py(checkpoint_json(model)); })
      .def("save", [](const Model& model, const std::string& path) { save_checkpoint(path, model); }, py::arg("path"));

  m.def("train", [](const py::object& pairs, const py::object& config) {
    const auto ps = list_from_py<PreferencePair>(pairs);
    const TrainConfig cfg = config.is_none() ? TrainConfig{} : from_py<TrainConfig>(config);
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(ps, cfg);
    }
    return py::make_tuple(r.model, to_py(r.report));
  }, py::arg("pairs"), py::arg("config") = py::none(), "Train a model; returns (model, report).");

  m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"));

  m.def("aggregate_ranking", [](const py::object& prompt, const py::object& candidates, const Model& model) {
    return to_py(aggregate_ranking(from_py<TutoringPrompt>(prompt), list_from_py<FeedbackCandidate>(candidates),
                                   model_scorer(model)));
  }, py::arg("prompt"), py::arg("candidates"), py::arg("model"));

  m.def("run_scenario", [](const py::object& spec, const py::object& dm, const py::object& dg, const py::object& rankings) {
    const ScenarioSpec s = from_py<ScenarioSpec>(spec);
    Datasets d;
    if (!dm.is_none()) d.dm = split_from_py(dm);
    if (!dg.is_none()) d.dg = split_from_py(dg);
    if (!rankings.is_none()) d.dm_rankings = list_from_py<RankedCandidateSet>(rankings);
    ScenarioResult r;
    {
      py::gil_scoped_release release;
      r = run_scenario(s, d);
    }
    return to_py(r.report);
  }, py::arg("spec"), py::arg("dm"), py::arg("dg") = py::none(), py::arg("rankings") = py::none());
}
