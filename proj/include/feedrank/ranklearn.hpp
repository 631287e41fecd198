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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "feedrank/error.hpp"
#include "feedrank/features.hpp"
#include "feedrank/losses.hpp"
#include "feedrank/scorer.hpp"
#include "feedrank/types.hpp"

namespace feedrank {

enum class Approach { Classifier, Reward, Dpo, RankNet, Ensemble };

/// The four trainable approaches, in ensemble priority order.
inline constexpr std::array<Approach, 4> kTrainableApproaches = {Approach::Classifier, Approach::Reward,
                                                                 Approach::Dpo, Approach::RankNet};

std::string_view approach_name(Approach a);
Approach approach_from_name(std::string_view name);

inline constexpr std::array<std::uint64_t, 5> kDefaultSeeds = {0, 42, 500, 1000, 1234};

struct TrainConfig {
  Approach approach = Approach::Reward;
  double learning_rate = 5e-5;
  std::size_t batch_size = 8;
  std::size_t epochs = 5;
  std::size_t max_sequence_length = 1024;  // feedback character cap
  std::uint64_t seed = 0;
  double dpo_beta = 0.1;
  ScalarArchitecture scalar;
  SequenceArchitecture sequence;
  std::uint64_t hash_seed = kDefaultHashSeed;

  FeatureOptions feature_options() const;
};

void validate(const TrainConfig& c);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);

/// Thrown when the loss stops being finite.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message) : Error("training", message) {}
};

/// A trained ranking model. Scalar approaches carry `scalar`; DPO carries
/// the trained policy and its frozen reference.
struct Model {
  Approach approach = Approach::Reward;
  TrainConfig config;
  std::optional<ScalarScorer> scalar;
  std::optional<SequenceScorer> policy;
  std::optional<SequenceScorer> reference;
};

struct TrainReport {
  Approach approach = Approach::Reward;
  std::uint64_t seed = 0;
  std::size_t pairs = 0;
  std::size_t steps = 0;
  std::vector<double> epoch_mean_loss;
};

void to_json(json& j, const TrainReport& r);

struct TrainResult {
  Model model;
  TrainReport report;
};

/// Untrained model for a config: zero linear weights, or for DPO a policy
/// and reference both set to the smoothed MLE fit of `chosen_corpus`.
Model initial_model(const TrainConfig& config, const std::vector<std::string>& chosen_corpus = {});

/// Memo of prompt features and frozen reference log-probabilities for one
/// model. Not thread-safe; results match uncached evaluation exactly.
class ScoringCache {
 public:
  explicit ScoringCache(const Model& model);
  PromptFeatureCache& features() { return features_; }
  double reference_logprob(const Model& model, const std::string& text);

 private:
  PromptFeatureCache features_;
  std::unordered_map<std::string, double> reference_;
};

/// Loss and gradient of one pair under the model's own approach.
LossResult pair_loss(const Model& model, const PreferencePair& pair, ScoringCache* cache = nullptr);

/// Mini-batch SGD (no momentum) over pairs shuffled each epoch by a stream
/// derived from (seed, approach). Deterministic for fixed inputs.
TrainResult train(const std::vector<PreferencePair>& pairs, const TrainConfig& config);

// ---------------------------------------------------------------------------

enum class Preference { ChosenFirst, RejectedFirst };

struct PairwisePrediction {
  std::string pair_id;
  Preference preference = Preference::RejectedFirst;
  double margin = 0.0;
  Approach approach = Approach::Reward;
  bool tie = false;
};

void to_json(json& j, const PairwisePrediction& p);
void from_json(const json& j, PairwisePrediction& p);

/// Applies the sign rule: margin > 0 prefers the first text; margin == 0 is
/// a tie resolved as rejected_first.
PairwisePrediction make_prediction(std::string pair_id, double margin, Approach approach);

/// Signed preference strength of `first` over `second`. Scalar approaches
/// use s(first) - s(second); the classifier uses half the difference of its
/// two ordered logits, which keeps the margin antisymmetric; DPO uses the
/// beta-scaled log-ratio difference.
double pair_margin(const Model& model, const TutoringPrompt& prompt, std::string_view first, std::string_view second,
                   ScoringCache* cache = nullptr);

/// `first` plays the chosen role in the returned prediction.
PairwisePrediction predict_pair(const Model& model, const TutoringPrompt& prompt, std::string_view first,
                                std::string_view second, ScoringCache* cache = nullptr);

PairwisePrediction predict_pair(const Model& model, const PreferencePair& pair, ScoringCache* cache = nullptr);

/// Per-approach margin scale used to compare margins across approaches.
struct MarginScale {
  double stddev = 1.0;
};

using MarginScales = std::map<Approach, MarginScale>;

/// Root-mean-square of each approach's margins (1 when empty or all zero).
MarginScales fit_margin_scales(const std::map<Approach, std::vector<double>>& margins);

/// Majority vote over exactly one prediction per trainable approach. A 2-2
/// split goes to the side with the larger sum of |margin| / scale, then to
/// the side backed by the highest-priority approach.
PairwisePrediction ensemble_vote(std::span<const PairwisePrediction> predictions, const MarginScales& scales = {});

// ---------------------------------------------------------------------------

/// JSON container: format tag, version, config, architecture and
/// base64-encoded little-endian parameter blocks.
json checkpoint_json(const Model& model);
Model model_from_checkpoint(const json& j);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace feedrank
