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

#include "feedrank/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "feedrank/error.hpp"
#include "feedrank/rng.hpp"

namespace feedrank {

void to_json(json& j, const ScalarArchitecture& a) {
  j = json{{"kind", a.hidden == 0 ? "linear" : "mlp"}, {"dimension", a.dimension}, {"hidden", a.hidden}};
}

void from_json(const json& j, ScalarArchitecture& a) {
  a.dimension = j.at("dimension").get<std::uint32_t>();
  a.hidden = j.value("hidden", std::size_t{0});
}

ScalarScorer::ScalarScorer(ScalarArchitecture arch, std::uint64_t init_seed) : arch_(arch) {
  if (arch_.dimension == 0) throw PreconditionError("scorer dimension must be positive");
  if (arch_.hidden == 0) {
    params_.assign(arch_.dimension, 0.0);
    return;
  }
  const std::size_t h = arch_.hidden;
  params_.assign(static_cast<std::size_t>(arch_.dimension) * h + 2 * h, 0.0);
  Rng rng(init_seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(arch_.dimension) * h; ++i) params_[i] = 0.5 * rng.normal();
}

void ScalarScorer::check(const FeatureVector& fv) const {
  if (fv.dimension != arch_.dimension) {
    throw PreconditionError("feature dimension " + std::to_string(fv.dimension) + " does not match scorer dimension " +
                            std::to_string(arch_.dimension));
  }
}

double ScalarScorer::score(const FeatureVector& fv) const {
  check(fv);
  if (arch_.hidden == 0) return fv.dot(params_);
  const std::size_t h = arch_.hidden;
  const std::size_t b_off = static_cast<std::size_t>(arch_.dimension) * h;
  const std::size_t v_off = b_off + h;
  std::vector<double> pre(params_.begin() + static_cast<std::ptrdiff_t>(b_off),
                          params_.begin() + static_cast<std::ptrdiff_t>(v_off));
  for (std::size_t k = 0; k < fv.nnz(); ++k) {
    const double* row = &params_[static_cast<std::size_t>(fv.indices[k]) * h];
    for (std::size_t u = 0; u < h; ++u) pre[u] += row[u] * fv.values[k];
  }
  double s = 0.0;
  for (std::size_t u = 0; u < h; ++u) s += params_[v_off + u] * std::tanh(pre[u]);
  return s;
}

void ScalarScorer::accumulate_gradient(const FeatureVector& fv, double scale, SparseGradient& grad) const {
  check(fv);
  if (arch_.hidden == 0) {
    for (std::size_t k = 0; k < fv.nnz(); ++k) grad.add(fv.indices[k], scale * fv.values[k]);
    return;
  }
  const std::size_t h = arch_.hidden;
  const std::size_t b_off = static_cast<std::size_t>(arch_.dimension) * h;
  const std::size_t v_off = b_off + h;
  std::vector<double> act(params_.begin() + static_cast<std::ptrdiff_t>(b_off),
                          params_.begin() + static_cast<std::ptrdiff_t>(v_off));
  for (std::size_t k = 0; k < fv.nnz(); ++k) {
    const double* row = &params_[static_cast<std::size_t>(fv.indices[k]) * h];
    for (std::size_t u = 0; u < h; ++u) act[u] += row[u] * fv.values[k];
  }
  for (auto& a : act) a = std::tanh(a);
  std::vector<double> delta(h);
  for (std::size_t u = 0; u < h; ++u) {
    grad.add(v_off + u, scale * act[u]);
    delta[u] = scale * params_[v_off + u] * (1.0 - act[u] * act[u]);
    grad.add(b_off + u, delta[u]);
  }
  for (std::size_t k = 0; k < fv.nnz(); ++k) {
    const std::size_t base = static_cast<std::size_t>(fv.indices[k]) * h;
    for (std::size_t u = 0; u < h; ++u) grad.add(base + u, delta[u] * fv.values[k]);
  }
}

void ScalarScorer::apply(const SparseGradient& grad, double step) {
  for (const auto& [i, g] : grad.entries()) params_[i] -= step * g;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::string alphabet) : alphabet_(std::move(alphabet)) {
  if (alphabet_.empty()) throw PreconditionError("vocabulary alphabet must be non-empty");
  lookup_.assign(256, alphabet_.size());
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    auto& slot = lookup_[static_cast<unsigned char>(alphabet_[i])];
    if (slot != alphabet_.size()) throw PreconditionError("vocabulary alphabet has duplicate characters");
    slot = i;
  }
}

std::size_t Vocabulary::token(char c) const {
  auto u = static_cast<unsigned char>(c);
  if (std::isspace(u)) u = ' ';
  if (u < 128 && std::isupper(u)) u = static_cast<unsigned char>(std::tolower(u));
  return lookup_[u];
}

std::vector<std::size_t> Vocabulary::tokenize(std::string_view text) const {
  std::vector<std::size_t> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(token(c));
  return out;
}

void to_json(json& j, const SequenceArchitecture& a) {
  j = json{{"kind", "char-ngram"}, {"alphabet", a.alphabet}, {"context_length", a.context_length}};
}

void from_json(const json& j, SequenceArchitecture& a) {
  a.alphabet = j.at("alphabet").get<std::string>();
  a.context_length = j.at("context_length").get<int>();
}

SequenceScorer::SequenceScorer(SequenceArchitecture arch) : arch_(std::move(arch)), vocab_(arch_.alphabet) {
  if (arch_.context_length < 1 || arch_.context_length > 2) {
    throw PreconditionError("sequence context length must be 1 or 2");
  }
  const std::size_t symbols = vocab_.size() + 1;  // tokens + BOS
  contexts_ = arch_.context_length == 1 ? symbols : symbols * symbols;
  logits_.assign(contexts_ * vocab_.size(), 0.0);
  lse_.assign(contexts_, std::numeric_limits<double>::quiet_NaN());
}

std::size_t SequenceScorer::advance(std::size_t context, std::size_t token) const {
  if (arch_.context_length == 1) return token;
  const std::size_t symbols = vocab_.size() + 1;
  return (context % symbols) * symbols + token;
}

std::size_t SequenceScorer::initial_context(std::span<const std::size_t> prefix_tokens) const {
  std::size_t ctx = arch_.context_length == 1 ? vocab_.bos() : vocab_.bos() * (vocab_.size() + 1) + vocab_.bos();
  for (auto t : prefix_tokens) ctx = advance(ctx, t);
  return ctx;
}

double SequenceScorer::row_logsumexp(std::size_t context) const {
  if (!std::isnan(lse_[context])) return lse_[context];
  const double* row = &logits_[context * vocab_.size()];
  const double m = *std::max_element(row, row + vocab_.size());
  double s = 0.0;
  for (std::size_t k = 0; k < vocab_.size(); ++k) s += std::exp(row[k] - m);
  lse_[context] = m + std::log(s);
  return lse_[context];
}

double SequenceScorer::score_tokens(std::span<const std::size_t> tokens, std::size_t context) const {
  double total = 0.0;
  for (auto t : tokens) {
    total += logits_[context * vocab_.size() + t] - row_logsumexp(context);
    context = advance(context, t);
  }
  return total;
}

double SequenceScorer::logprob(std::string_view text) const {
  const auto tokens = vocab_.tokenize(text);
  return score_tokens(tokens, initial_context({}));
}

double SequenceScorer::logprob_continuation(std::string_view prefix, std::string_view text) const {
  const auto pre = vocab_.tokenize(prefix);
  const auto tokens = vocab_.tokenize(text);
  return score_tokens(tokens, initial_context(pre));
}

void SequenceScorer::accumulate_gradient(std::string_view text, double scale, SparseGradient& grad) const {
  const std::size_t v = vocab_.size();
  std::size_t ctx = initial_context({});
  for (auto t : vocab_.tokenize(text)) {
    const double lse = row_logsumexp(ctx);
    const std::size_t base = ctx * v;
    for (std::size_t k = 0; k < v; ++k) {
      const double p = std::exp(logits_[base + k] - lse);
      grad.add(base + k, scale * ((k == t ? 1.0 : 0.0) - p));
    }
    ctx = advance(ctx, t);
  }
}

std::vector<double> SequenceScorer::distribution(std::size_t context) const {
  if (context >= contexts_) throw PreconditionError("context index out of range");
  const double lse = row_logsumexp(context);
  std::vector<double> p(vocab_.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(logits_[context * vocab_.size() + k] - lse);
  return p;
}

void SequenceScorer::fit_mle(const std::vector<std::string>& corpus, double smoothing) {
  if (!(smoothing > 0.0)) throw PreconditionError("MLE smoothing must be positive");
  std::vector<double> counts(logits_.size(), 0.0);
  for (const auto& text : corpus) {
    std::size_t ctx = initial_context({});
    for (auto t : vocab_.tokenize(text)) {
      counts[ctx * vocab_.size() + t] += 1.0;
      ctx = advance(ctx, t);
    }
  }
  for (std::size_t i = 0; i < logits_.size(); ++i) logits_[i] = std::log(counts[i] + smoothing);
  std::fill(lse_.begin(), lse_.end(), std::numeric_limits<double>::quiet_NaN());
}

void SequenceScorer::set_parameter(std::size_t index, double value) {
  logits_.at(index) = value;
  lse_[index / vocab_.size()] = std::numeric_limits<double>::quiet_NaN();
}

void SequenceScorer::set_parameters(std::span<const double> values) {
  if (values.size() != logits_.size()) throw PreconditionError("parameter count does not match the architecture");
  std::copy(values.begin(), values.end(), logits_.begin());
  std::fill(lse_.begin(), lse_.end(), std::numeric_limits<double>::quiet_NaN());
}

void SequenceScorer::apply(const SparseGradient& grad, double step) {
  for (const auto& [i, g] : grad.entries()) {
    logits_[i] -= step * g;
    lse_[i / vocab_.size()] = std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace feedrank
