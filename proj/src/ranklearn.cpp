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

#include "feedrank/ranklearn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "feedrank/hash.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/rng.hpp"

namespace feedrank {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes little-endian hosts");

constexpr std::string_view kCheckpointFormat = "feedrank-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string capped(std::string_view text, std::size_t cap) {
  return std::string(cap > 0 && text.size() > cap ? text.substr(0, cap) : text);
}

template <class T>
std::string encode_array(const std::vector<T>& values) {
  std::vector<std::uint8_t> bytes(values.size() * sizeof(T));
  if (!values.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  return base64_encode(bytes);
}

template <class T>
std::vector<T> decode_array(const std::string& text, std::size_t expected) {
  const std::string bytes = base64_decode(text);
  if (bytes.size() != expected * sizeof(T)) throw Error("checkpoint", "parameter block has the wrong size");
  std::vector<T> out(expected);
  if (expected > 0) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

json encode_block(std::span<const double> params) {
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i] != 0.0) {
      idx.push_back(static_cast<std::uint32_t>(i));
      val.push_back(params[i]);
    }
  }
  if (idx.size() * 2 < params.size() && params.size() <= std::numeric_limits<std::uint32_t>::max()) {
    return json{{"encoding", "sparse-u32-f64le-base64"},
                {"count", params.size()},
                {"nnz", idx.size()},
                {"indices", encode_array(idx)},
                {"values", encode_array(val)}};
  }
  return json{{"encoding", "f64le-base64"},
              {"count", params.size()},
              {"data", encode_array(std::vector<double>(params.begin(), params.end()))}};
}

void decode_block(const json& j, std::span<double> params) {
  const auto count = j.at("count").get<std::size_t>();
  if (count != params.size()) throw Error("checkpoint", "parameter count does not match the architecture");
  const std::string encoding = j.at("encoding").get<std::string>();
  if (encoding == "f64le-base64") {
    const auto values = decode_array<double>(j.at("data").get<std::string>(), count);
    std::copy(values.begin(), values.end(), params.begin());
  } else if (encoding == "sparse-u32-f64le-base64") {
    const auto nnz = j.at("nnz").get<std::size_t>();
    const auto idx = decode_array<std::uint32_t>(j.at("indices").get<std::string>(), nnz);
    const auto val = decode_array<double>(j.at("values").get<std::string>(), nnz);
    std::fill(params.begin(), params.end(), 0.0);
    for (std::size_t k = 0; k < nnz; ++k) params[idx.at(k) < count ? idx[k] : throw Error("checkpoint", "index out of range")] = val[k];
  } else {
    throw Error("checkpoint", "unknown parameter encoding '" + encoding + "'");
  }
}

bool is_scalar(Approach a) { return a == Approach::Classifier || a == Approach::Reward || a == Approach::RankNet; }

}  // namespace

std::string_view approach_name(Approach a) {
  switch (a) {
    case Approach::Classifier: return "classifier";
    case Approach::Reward: return "reward";
    case Approach::Dpo: return "dpo";
    case Approach::RankNet: return "ranknet";
    case Approach::Ensemble: return "ensemble";
  }
  return "reward";
}

Approach approach_from_name(std::string_view name) {
  for (Approach a : {Approach::Classifier, Approach::Reward, Approach::Dpo, Approach::RankNet, Approach::Ensemble}) {
    if (approach_name(a) == name) return a;
  }
  throw ValidationError("approach", "invalid field approach: unknown approach '" + std::string(name) + "'");
}

FeatureOptions TrainConfig::feature_options() const {
  return FeatureOptions{scalar.dimension, hash_seed, max_sequence_length};
}

void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning_rate", "invalid field learning_rate: must be > 0");
  if (c.epochs < 1) throw ValidationError("epochs", "invalid field epochs: must be >= 1");
  if (c.batch_size < 1) throw ValidationError("batch_size", "invalid field batch_size: must be >= 1");
  if (!(c.dpo_beta > 0.0)) throw ValidationError("dpo_beta", "invalid field dpo_beta: must be > 0");
  if (c.approach == Approach::Ensemble) {
    throw ValidationError("approach", "invalid field approach: the ensemble is not trained directly");
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"approach", approach_name(c.approach)},
           {"learning_rate", c.learning_rate},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"max_sequence_length", c.max_sequence_length},
           {"seed", c.seed},
           {"dpo_beta", c.dpo_beta},
           {"scalar", c.scalar},
           {"sequence", c.sequence},
           {"hash_seed", c.hash_seed}};
}

void from_json(const json& j, TrainConfig& c) {
  TrainConfig d;
  c.approach = approach_from_name(j.value("approach", std::string(approach_name(d.approach))));
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.max_sequence_length = j.value("max_sequence_length", d.max_sequence_length);
  c.seed = j.value("seed", d.seed);
  c.dpo_beta = j.value("dpo_beta", d.dpo_beta);
  c.scalar = j.contains("scalar") ? j["scalar"].get<ScalarArchitecture>() : d.scalar;
  c.sequence = j.contains("sequence") ? j["sequence"].get<SequenceArchitecture>() : d.sequence;
  c.hash_seed = j.value("hash_seed", d.hash_seed);
}

void to_json(json& j, const TrainReport& r) {
  j = json{{"approach", approach_name(r.approach)},
           {"seed", r.seed},
           {"pairs", r.pairs},
           {"steps", r.steps},
           {"epoch_mean_loss", r.epoch_mean_loss}};
}

Model initial_model(const TrainConfig& config, const std::vector<std::string>& chosen_corpus) {
  validate(config);
  Model m;
  m.approach = config.approach;
  m.config = config;
  if (is_scalar(config.approach)) {
    m.scalar.emplace(config.scalar, derive_seed(config.seed, 0x5ca1a7));
  } else {
    SequenceScorer reference(config.sequence);
    std::vector<std::string> corpus;
    corpus.reserve(chosen_corpus.size());
    for (const auto& t : chosen_corpus) corpus.push_back(capped(t, config.max_sequence_length));
    reference.fit_mle(corpus);
    m.reference = reference;
    m.policy = reference;
  }
  return m;
}

ScoringCache::ScoringCache(const Model& model) : features_(model.config.feature_options()) {}

double ScoringCache::reference_logprob(const Model& model, const std::string& text) {
  auto it = reference_.find(text);
  if (it == reference_.end()) it = reference_.emplace(text, model.reference->logprob(text)).first;
  return it->second;
}

LossResult pair_loss(const Model& model, const PreferencePair& pair, ScoringCache* cache) {
  const FeatureOptions fo = model.config.feature_options();
  if (is_scalar(model.approach)) {
    const PromptFeatures pf = cache ? PromptFeatures{} : prompt_features(pair.prompt, fo);
    const PromptFeatures& prompt = cache ? cache->features().get(pair.prompt) : pf;
    if (model.approach == Approach::Classifier) {
      return loss_classifier_symmetric(*model.scalar, featurize_ordered(prompt, pair.chosen.text, pair.rejected.text, fo),
                                       featurize_ordered(prompt, pair.rejected.text, pair.chosen.text, fo));
    }
    const FeatureVector chosen = featurize(prompt, pair.chosen.text, fo);
    const FeatureVector rejected = featurize(prompt, pair.rejected.text, fo);
    return model.approach == Approach::Reward ? loss_reward(*model.scalar, chosen, rejected)
                                              : loss_ranknet(*model.scalar, chosen, rejected);
  }
  if (model.approach == Approach::Dpo) {
    const std::size_t cap = model.config.max_sequence_length;
    const std::string chosen = capped(pair.chosen.text, cap);
    const std::string rejected = capped(pair.rejected.text, cap);
    if (cache) {
      return loss_dpo(*model.policy, chosen, rejected, cache->reference_logprob(model, chosen),
                      cache->reference_logprob(model, rejected), model.config.dpo_beta);
    }
    return loss_dpo(*model.policy, *model.reference, chosen, rejected, model.config.dpo_beta);
  }
  throw PreconditionError("the ensemble has no training loss");
}

TrainResult train(const std::vector<PreferencePair>& pairs, const TrainConfig& config) {
  validate(config);
  if (pairs.empty()) throw PreconditionError("train needs at least one pair");

  std::vector<std::string> chosen;
  if (config.approach == Approach::Dpo) {
    chosen.reserve(pairs.size());
    for (const auto& p : pairs) chosen.push_back(p.chosen.text);
  }
  TrainResult result{initial_model(config, chosen), {}};
  Model& model = result.model;
  TrainReport& report = result.report;
  report.approach = config.approach;
  report.seed = config.seed;
  report.pairs = pairs.size();

  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(config.approach) + 1));
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ScoringCache cache(model);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      SparseGradient batch;
      for (std::size_t k = start; k < end; ++k) {
        LossResult r = pair_loss(model, pairs[order[k]], &cache);
        if (!std::isfinite(r.loss)) {
          std::ostringstream os;
          os << "non-finite loss at epoch " << epoch + 1 << ", step " << report.steps + 1 << " (pair "
             << pairs[order[k]].pair_id << ", learning_rate " << config.learning_rate
             << "); try lowering the learning rate";
          throw TrainingError(os.str());
        }
        loss_sum += r.loss;
        batch.append(r.gradient);
      }
      const double step = config.learning_rate / static_cast<double>(end - start);
      if (model.scalar) {
        model.scalar->apply(batch, step);
      } else {
        model.policy->apply(batch, step);
      }
      ++report.steps;
    }
    report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(pairs.size()));
  }
  return result;
}

// ---------------------------------------------------------------------------

void to_json(json& j, const PairwisePrediction& p) {
  j = json{{"pair_id", p.pair_id},
           {"approach", approach_name(p.approach)},
           {"margin", p.margin},
           {"preference", p.preference == Preference::ChosenFirst ? "chosen_first" : "rejected_first"},
           {"tie", p.tie}};
}

void from_json(const json& j, PairwisePrediction& p) {
  p.pair_id = j.at("pair_id").get<std::string>();
  p.approach = approach_from_name(j.at("approach").get<std::string>());
  p.margin = j.at("margin").get<double>();
  const std::string pref = j.at("preference").get<std::string>();
  if (pref != "chosen_first" && pref != "rejected_first") {
    throw ValidationError("preference", "invalid field preference: '" + pref + "'");
  }
  p.preference = pref == "chosen_first" ? Preference::ChosenFirst : Preference::RejectedFirst;
  p.tie = j.value("tie", false);
  if (!std::isfinite(p.margin)) throw ValidationError("margin", "invalid field margin: must be finite");
  if ((p.preference == Preference::ChosenFirst) != (p.margin > 0.0)) {
    throw ValidationError("preference", "invalid field preference: inconsistent with the margin sign");
  }
}

PairwisePrediction make_prediction(std::string pair_id, double margin, Approach approach) {
  PairwisePrediction p;
  p.pair_id = std::move(pair_id);
  p.margin = margin;
  p.approach = approach;
  p.tie = margin == 0.0;
  p.preference = margin > 0.0 ? Preference::ChosenFirst : Preference::RejectedFirst;
  return p;
}

double pair_margin(const Model& model, const TutoringPrompt& prompt, std::string_view first, std::string_view second,
                   ScoringCache* cache) {
  const FeatureOptions fo = model.config.feature_options();
  if (is_scalar(model.approach)) {
    const PromptFeatures pf = cache ? PromptFeatures{} : prompt_features(prompt, fo);
    const PromptFeatures& pfeat = cache ? cache->features().get(prompt) : pf;
    if (model.approach == Approach::Classifier) {
      return 0.5 * (model.scalar->score(featurize_ordered(pfeat, first, second, fo)) -
                    model.scalar->score(featurize_ordered(pfeat, second, first, fo)));
    }
    return model.scalar->score(featurize(pfeat, first, fo)) - model.scalar->score(featurize(pfeat, second, fo));
  }
  if (model.approach == Approach::Dpo) {
    const std::size_t cap = model.config.max_sequence_length;
    const std::string a = capped(first, cap);
    const std::string b = capped(second, cap);
    const double ref_a = cache ? cache->reference_logprob(model, a) : model.reference->logprob(a);
    const double ref_b = cache ? cache->reference_logprob(model, b) : model.reference->logprob(b);
    const double beta = model.config.dpo_beta;
    return beta * ((model.policy->logprob(a) - ref_a) - (model.policy->logprob(b) - ref_b));
  }
  throw PreconditionError("ensemble margins come from ensemble_vote");
}

PairwisePrediction predict_pair(const Model& model, const TutoringPrompt& prompt, std::string_view first,
                                std::string_view second, ScoringCache* cache) {
  double margin = pair_margin(model, prompt, first, second, cache);
  if (!std::isfinite(margin)) throw Error("prediction", "non-finite margin");
  return make_prediction(compute_pair_id(prompt.id, first, second), margin, model.approach);
}

PairwisePrediction predict_pair(const Model& model, const PreferencePair& pair, ScoringCache* cache) {
  PairwisePrediction p = predict_pair(model, pair.prompt, pair.chosen.text, pair.rejected.text, cache);
  p.pair_id = pair.pair_id;
  return p;
}

MarginScales fit_margin_scales(const std::map<Approach, std::vector<double>>& margins) {
  MarginScales out;
  for (const auto& [approach, values] : margins) {
    double ss = 0.0;
    for (double m : values) ss += m * m;
    const double rms = values.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(values.size()));
    out[approach] = MarginScale{rms > 0.0 && std::isfinite(rms) ? rms : 1.0};
  }
  return out;
}

PairwisePrediction ensemble_vote(std::span<const PairwisePrediction> predictions, const MarginScales& scales) {
  std::array<const PairwisePrediction*, 4> by_approach{};
  for (const auto& p : predictions) {
    const auto it = std::find(kTrainableApproaches.begin(), kTrainableApproaches.end(), p.approach);
    if (it == kTrainableApproaches.end()) throw PreconditionError("ensemble inputs must be trainable approaches");
    auto& slot = by_approach[static_cast<std::size_t>(it - kTrainableApproaches.begin())];
    if (slot) throw PreconditionError("duplicate prediction for approach " + std::string(approach_name(p.approach)));
    slot = &p;
  }
  std::string missing;
  for (std::size_t k = 0; k < by_approach.size(); ++k) {
    if (!by_approach[k]) missing += (missing.empty() ? "" : ", ") + std::string(approach_name(kTrainableApproaches[k]));
  }
  if (!missing.empty()) throw PreconditionError("ensemble is missing approach(es): " + missing);
  const std::string& pair_id = by_approach[0]->pair_id;
  for (const auto* p : by_approach) {
    if (p->pair_id != pair_id) throw PreconditionError("ensemble inputs refer to different pairs");
  }

  int votes_for = 0;
  double strength_for = 0.0;
  double strength_against = 0.0;
  for (const auto* p : by_approach) {
    const auto it = scales.find(p->approach);
    const double scale = it == scales.end() ? 1.0 : it->second.stddev;
    const double strength = std::abs(p->margin) / scale;
    if (p->preference == Preference::ChosenFirst) {
      ++votes_for;
      strength_for += strength;
    } else {
      strength_against += strength;
    }
  }

  double margin = 0.0;
  if (votes_for != 2) {
    margin = static_cast<double>(2 * votes_for - 4);
  } else if (strength_for != strength_against) {
    margin = strength_for - strength_against;
  } else {
    // Fully tied: the highest-priority approach decides; the margin only carries the sign.
    margin = by_approach[0]->preference == Preference::ChosenFirst ? std::numeric_limits<double>::min()
                                                                    : -std::numeric_limits<double>::min();
  }
  return make_prediction(pair_id, margin, Approach::Ensemble);
}

// ---------------------------------------------------------------------------

json checkpoint_json(const Model& model) {
  json j{{"format", kCheckpointFormat},
         {"version", kCheckpointVersion},
         {"approach", approach_name(model.approach)},
         {"config", model.config},
         {"features", model.config.feature_options()},
         {"run_seed", model.config.seed},
         {"hash_seed", model.config.hash_seed}};
  if (model.scalar) {
    j["architecture"] = model.scalar->architecture();
    j["parameters"] = json{{"scalar", encode_block(model.scalar->parameters())}};
  } else {
    j["architecture"] = model.policy->architecture();
    j["parameters"] = json{{"policy", encode_block(model.policy->parameters())},
                           {"reference", encode_block(model.reference->parameters())}};
  }
  return j;
}

Model model_from_checkpoint(const json& j) {
  if (j.value("format", "") != kCheckpointFormat) throw Error("checkpoint", "not a feedrank checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw Error("checkpoint", "unsupported checkpoint version");
  Model m;
  m.config = j.at("config").get<TrainConfig>();
  m.approach = m.config.approach;
  if (is_scalar(m.approach)) {
    m.scalar.emplace(m.config.scalar, 0);
    decode_block(j.at("parameters").at("scalar"), m.scalar->parameters());
  } else {
    m.policy.emplace(m.config.sequence);
    m.reference.emplace(m.config.sequence);
    std::vector<double> values(m.policy->parameters().size());
    decode_block(j.at("parameters").at("policy"), values);
    m.policy->set_parameters(values);
    decode_block(j.at("parameters").at("reference"), values);
    m.reference->set_parameters(values);
  }
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_text_file(path, checkpoint_json(model).dump() + "\n");
}

Model load_checkpoint(const std::filesystem::path& path) { return model_from_checkpoint(load_json_file(path)); }

}  // namespace feedrank
