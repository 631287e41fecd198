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

#include "feedrank/features.hpp"

#include <algorithm>
#include <cmath>

#include "feedrank/error.hpp"
#include "feedrank/hash.hpp"

namespace feedrank {
namespace {

struct Hit {
  std::uint32_t index;
  double sign;
};

void hash_field(std::string_view text, char tag, const FeatureOptions& o, std::vector<Hit>& out) {
  const std::uint64_t field_seed = o.hash_seed ^ (static_cast<std::uint64_t>(static_cast<unsigned char>(tag)) * 0x9e3779b97f4a7c15ULL);
  const std::uint32_t mask = o.dimension - 1;
  for (std::size_t n = 2; n <= 4; ++n) {
    if (text.size() < n) break;
    for (std::size_t i = 0; i + n <= text.size(); ++i) {
      const std::uint64_t h = fast_hash64(text.substr(i, n), field_seed + n);
      out.push_back({static_cast<std::uint32_t>(h & mask), (h >> 63) ? -1.0 : 1.0});
    }
  }
}

FeatureVector finish(const PromptFeatures& prompt, std::vector<Hit>& hits, std::uint32_t dimension) {
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.index < b.index; });
  FeatureVector fv;
  fv.dimension = dimension;
  fv.indices.reserve(prompt.indices.size() + hits.size());
  fv.values.reserve(prompt.indices.size() + hits.size());
  auto push = [&](std::uint32_t index, double value) {
    if (!fv.indices.empty() && fv.indices.back() == index) {
      fv.values.back() += value;
    } else {
      fv.indices.push_back(index);
      fv.values.push_back(value);
    }
  };
  std::size_t p = 0;
  for (const auto& h : hits) {
    while (p < prompt.indices.size() && prompt.indices[p] <= h.index) {
      push(prompt.indices[p], prompt.values[p]);
      ++p;
    }
    push(h.index, h.sign);
  }
  for (; p < prompt.indices.size(); ++p) push(prompt.indices[p], prompt.values[p]);
  // Drop exact cancellations so nnz reflects stored mass.
  std::size_t w = 0;
  for (std::size_t r = 0; r < fv.indices.size(); ++r) {
    if (fv.values[r] == 0.0) continue;
    fv.indices[w] = fv.indices[r];
    fv.values[w] = fv.values[r];
    ++w;
  }
  fv.indices.resize(w);
  fv.values.resize(w);
  const double norm = std::sqrt(fv.squared_norm());
  if (norm > 0.0) {
    for (auto& v : fv.values) v /= norm;
  }
  return fv;
}

void check_options(const FeatureOptions& o) {
  if (o.dimension < 2 || (o.dimension & (o.dimension - 1)) != 0) {
    throw PreconditionError("feature dimension must be a power of two >= 2");
  }
}

std::string_view capped(std::string_view text, const FeatureOptions& o) {
  return o.max_feedback_chars > 0 && text.size() > o.max_feedback_chars ? text.substr(0, o.max_feedback_chars)
                                                                          : text;
}

void hash_prompt(const TutoringPrompt& prompt, const FeatureOptions& o, std::vector<Hit>& hits) {
  hash_field(prompt.context, 'c', o, hits);
  hash_field(prompt.question, 'q', o, hits);
  hash_field(prompt.student_answer, 's', o, hits);
}

}  // namespace

double FeatureVector::squared_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

double FeatureVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) s += values[k] * dense[indices[k]];
  return s;
}

FeatureVector FeatureVector::scaled(double alpha) const {
  FeatureVector out = *this;
  for (auto& v : out.values) v *= alpha;
  return out;
}

void to_json(json& j, const FeatureOptions& o) {
  j = json{{"dimension", o.dimension}, {"hash_seed", o.hash_seed}, {"max_feedback_chars", o.max_feedback_chars}};
}

void from_json(const json& j, FeatureOptions& o) {
  o.dimension = j.at("dimension").get<std::uint32_t>();
  o.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  o.max_feedback_chars = j.value("max_feedback_chars", std::size_t{0});
}

PromptFeatures prompt_features(const TutoringPrompt& prompt, const FeatureOptions& options) {
  check_options(options);
  std::vector<Hit> hits;
  hits.reserve(3 * (prompt.context.size() + prompt.question.size() + prompt.student_answer.size()));
  hash_prompt(prompt, options, hits);
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.index < b.index; });
  PromptFeatures out;
  out.dimension = options.dimension;
  for (const auto& h : hits) {
    if (!out.indices.empty() && out.indices.back() == h.index) {
      out.values.back() += h.sign;
    } else {
      out.indices.push_back(h.index);
      out.values.push_back(h.sign);
    }
  }
  return out;
}

FeatureVector featurize(const PromptFeatures& prompt, std::string_view feedback, const FeatureOptions& options) {
  check_options(options);
  if (prompt.dimension != options.dimension) throw PreconditionError("prompt features use a different dimension");
  if (trim(feedback).empty()) throw PreconditionError("feedback must be non-empty");
  std::vector<Hit> hits;
  hash_field(capped(feedback, options), 'f', options, hits);
  return finish(prompt, hits, options.dimension);
}

FeatureVector featurize_ordered(const PromptFeatures& prompt, std::string_view first, std::string_view second,
                                const FeatureOptions& options) {
  check_options(options);
  if (prompt.dimension != options.dimension) throw PreconditionError("prompt features use a different dimension");
  if (trim(first).empty() || trim(second).empty()) throw PreconditionError("feedback must be non-empty");
  std::vector<Hit> hits;
  hash_field(capped(first, options), 'a', options, hits);
  hash_field(capped(second, options), 'b', options, hits);
  return finish(prompt, hits, options.dimension);
}

FeatureVector featurize(const TutoringPrompt& prompt, std::string_view feedback, const FeatureOptions& options) {
  return featurize(prompt_features(prompt, options), feedback, options);
}

FeatureVector featurize_ordered(const TutoringPrompt& prompt, std::string_view first, std::string_view second,
                                const FeatureOptions& options) {
  return featurize_ordered(prompt_features(prompt, options), first, second, options);
}

const PromptFeatures& PromptFeatureCache::get(const TutoringPrompt& prompt) {
  auto it = entries_.find(prompt.id);
  if (it == entries_.end()) it = entries_.emplace(prompt.id, prompt_features(prompt, options_)).first;
  return it->second;
}

void SparseGradient::append(const SparseGradient& other, double scale) {
  entries_.reserve(entries_.size() + other.entries_.size());
  for (const auto& [i, v] : other.entries_) entries_.emplace_back(i, v * scale);
}

void SparseGradient::coalesce() {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t w = 0;
  for (std::size_t r = 0; r < entries_.size(); ++r) {
    if (w > 0 && entries_[w - 1].first == entries_[r].first) {
      entries_[w - 1].second += entries_[r].second;
    } else {
      entries_[w++] = entries_[r];
    }
  }
  entries_.resize(w);
}

std::vector<double> SparseGradient::to_dense(std::size_t n) const {
  std::vector<double> out(n, 0.0);
  for (const auto& [i, v] : entries_) out.at(i) += v;
  return out;
}

}  // namespace feedrank
