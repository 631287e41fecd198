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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedrank/features.hpp"

namespace feedrank {

struct ScalarArchitecture {
  std::uint32_t dimension = kDefaultFeatureDimension;
  std::size_t hidden = 0;  // 0 = linear; otherwise one tanh layer of this width

  bool operator==(const ScalarArchitecture&) const = default;
};

void to_json(json& j, const ScalarArchitecture& a);
void from_json(const json& j, ScalarArchitecture& a);

/// Maps a feature vector to a real score.
///
/// Linear: s(x) = w.x (no bias, so s(a x) = a s(x)).
/// Hidden layer: s(x) = sum_h v_h tanh(sum_i W_ih x_i + b_h). Parameters are
/// laid out as W (feature-major, dimension x hidden), then b, then v. The
/// output weights start at zero so an untrained scorer returns 0.
class ScalarScorer {
 public:
  explicit ScalarScorer(ScalarArchitecture arch = {}, std::uint64_t init_seed = 0);

  double score(const FeatureVector& fv) const;
  /// Adds scale * d score(fv) / d params to `grad`.
  void accumulate_gradient(const FeatureVector& fv, double scale, SparseGradient& grad) const;

  const ScalarArchitecture& architecture() const { return arch_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  void apply(const SparseGradient& grad, double step);

 private:
  void check(const FeatureVector& fv) const;

  ScalarArchitecture arch_;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------

/// Character vocabulary. Characters outside the alphabet share one OOV token;
/// ASCII letters are lower-cased and whitespace collapses to ' '.
class Vocabulary {
 public:
  static constexpr std::string_view kDefaultAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789 .,!?'\"-:;()";

  explicit Vocabulary(std::string alphabet = std::string(kDefaultAlphabet));

  /// Output vocabulary size, including the OOV token.
  std::size_t size() const { return alphabet_.size() + 1; }
  /// Context-only begin-of-text symbol id (== size()).
  std::size_t bos() const { return size(); }
  std::size_t token(char c) const;
  std::vector<std::size_t> tokenize(std::string_view text) const;
  const std::string& alphabet() const { return alphabet_; }

 private:
  std::string alphabet_;
  std::vector<std::size_t> lookup_;
};

struct SequenceArchitecture {
  std::string alphabet = std::string(Vocabulary::kDefaultAlphabet);
  int context_length = 2;  // 1 or 2 previous tokens

  bool operator==(const SequenceArchitecture&) const = default;
};

void to_json(json& j, const SequenceArchitecture& a);
void from_json(const json& j, SequenceArchitecture& a);

/// Token-level categorical model with one learnable logit row per context
/// (the previous one or two tokens, BOS-padded). Rows are softmax-normalised.
/// Row normalisers are memoised, so concurrent use of one instance is unsafe.
class SequenceScorer {
 public:
  explicit SequenceScorer(SequenceArchitecture arch = {});

  /// Sum of log P(token | context) over the text, starting from BOS.
  double logprob(std::string_view text) const;
  /// Same, conditioned on `prefix` as preceding text.
  double logprob_continuation(std::string_view prefix, std::string_view text) const;
  /// Adds scale * d logprob(text) / d params to `grad`.
  void accumulate_gradient(std::string_view text, double scale, SparseGradient& grad) const;

  /// Probability distribution of the row for a context index.
  std::vector<double> distribution(std::size_t context) const;
  std::size_t context_count() const { return contexts_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const SequenceArchitecture& architecture() const { return arch_; }

  /// Smoothed maximum-likelihood logits: log(count + smoothing).
  void fit_mle(const std::vector<std::string>& corpus, double smoothing = 1.0);

  std::span<const double> parameters() const { return logits_; }
  void set_parameter(std::size_t index, double value);
  void set_parameters(std::span<const double> values);
  void apply(const SparseGradient& grad, double step);

 private:
  std::size_t advance(std::size_t context, std::size_t token) const;
  std::size_t initial_context(std::span<const std::size_t> prefix_tokens) const;
  double row_logsumexp(std::size_t context) const;
  double score_tokens(std::span<const std::size_t> tokens, std::size_t context) const;

  SequenceArchitecture arch_;
  Vocabulary vocab_;
  std::size_t contexts_ = 0;
  std::vector<double> logits_;
  mutable std::vector<double> lse_;  // NaN marks a stale row
};

}  // namespace feedrank
