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
#include <unordered_map>
#include <utility>
#include <vector>

#include "feedrank/types.hpp"

namespace feedrank {

inline constexpr std::uint32_t kDefaultFeatureDimension = 1u << 18;
inline constexpr std::uint64_t kDefaultHashSeed = 0x6665656472616e6bULL;

/// Sparse vector with sorted, unique indices below `dimension`.
struct FeatureVector {
  std::uint32_t dimension = kDefaultFeatureDimension;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }
  double squared_norm() const;
  double dot(std::span<const double> dense) const;
  FeatureVector scaled(double alpha) const;

  bool operator==(const FeatureVector&) const = default;
};

struct FeatureOptions {
  std::uint32_t dimension = kDefaultFeatureDimension;  // power of two
  std::uint64_t hash_seed = kDefaultHashSeed;
  std::size_t max_feedback_chars = 0;  // 0 = no truncation
};

void to_json(json& j, const FeatureOptions& o);
void from_json(const json& j, FeatureOptions& o);

/// Signed hashing of character 2-, 3- and 4-grams from the context,
/// question, student answer and feedback. Each field has its own tag, so one
/// n-gram maps to different slots per field. The result is L2-normalised.
FeatureVector featurize(const TutoringPrompt& prompt, std::string_view feedback,
                        const FeatureOptions& options = {});

/// Ordered two-slot variant for the pairwise classifier: `first` and
/// `second` feedback texts use distinct slot tags.
FeatureVector featurize_ordered(const TutoringPrompt& prompt, std::string_view first,
                                std::string_view second, const FeatureOptions& options = {});

/// Prompt-side hash counts (sorted, unnormalised). Featurizing many
/// feedback texts for one prompt can reuse them; results are identical to
/// the direct overloads.
struct PromptFeatures {
  std::uint32_t dimension = kDefaultFeatureDimension;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};

PromptFeatures prompt_features(const TutoringPrompt& prompt, const FeatureOptions& options = {});
FeatureVector featurize(const PromptFeatures& prompt, std::string_view feedback, const FeatureOptions& options = {});
FeatureVector featurize_ordered(const PromptFeatures& prompt, std::string_view first, std::string_view second,
                                const FeatureOptions& options = {});

/// Prompt features memoised by prompt id. Not thread-safe.
class PromptFeatureCache {
 public:
  explicit PromptFeatureCache(FeatureOptions options = {}) : options_(options) {}
  const PromptFeatures& get(const TutoringPrompt& prompt);
  const FeatureOptions& options() const { return options_; }

 private:
  FeatureOptions options_;
  std::unordered_map<std::string, PromptFeatures> entries_;
};

/// Accumulator of (flat parameter index, value) contributions.
class SparseGradient {
 public:
  void add(std::size_t index, double value) { entries_.emplace_back(index, value); }
  void append(const SparseGradient& other, double scale = 1.0);
  /// Sorts by index and merges duplicates.
  void coalesce();
  void clear() { entries_.clear(); }

  const std::vector<std::pair<std::size_t, double>>& entries() const { return entries_; }
  /// Dense copy of length n (coalescing not required).
  std::vector<double> to_dense(std::size_t n) const;

 private:
  std::vector<std::pair<std::size_t, double>> entries_;
};

}  // namespace feedrank
