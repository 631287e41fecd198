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

#include "feedrank/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "feedrank/hash.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/pairbuilder.hpp"
#include "feedrank/rng.hpp"

namespace feedrank {
namespace {

std::string derived_item_id(const ComprehensionItem& item) {
  return "item-" + content_hash128({item.story, item.question, item.answer, item.options[0],
                                    item.options[1], item.options[2], item.options[3]})
                       .substr(0, 16);
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

std::string strip_question_kind(const std::string& q) {
  for (std::string_view prefix : {"one: ", "multiple: "}) {
    if (q.rfind(prefix, 0) == 0) return q.substr(prefix.size());
  }
  return q;
}

}  // namespace

void validate(const ComprehensionItem& item) {
  if (trim(item.story).empty()) throw ValidationError("story", "invalid field story: must be non-empty");
  if (trim(item.question).empty()) {
    throw ValidationError("question", "invalid field question: must be non-empty");
  }
  const auto hits = std::count(item.options.begin(), item.options.end(), item.answer);
  if (hits != 1) throw ValidationError("answer", "invalid field answer: must equal exactly one option");
  std::set<std::string> unique(item.options.begin(), item.options.end());
  if (unique.size() != item.options.size()) {
    throw ValidationError("options", "invalid field options: options must be pairwise distinct");
  }
}

void to_json(json& j, const ComprehensionItem& item) {
  j = item.extra.is_object() ? item.extra : json::object();
  j["id"] = item.id;
  j["story"] = item.story;
  j["question"] = item.question;
  j["answer"] = item.answer;
  j["options"] = item.options;
}

void from_json(const json& j, ComprehensionItem& item) {
  if (!j.is_object()) throw ValidationError("record", "invalid field record: expected a JSON object");
  for (const char* field : {"story", "question", "answer", "options"}) {
    if (!j.contains(field) || j[field].is_null()) {
      throw ValidationError(field, std::string("missing field ") + field);
    }
  }
  item.story = j["story"].get<std::string>();
  item.question = j["question"].get<std::string>();
  item.answer = j["answer"].get<std::string>();
  const json& opts = j["options"];
  if (!opts.is_array() || opts.size() != 4) {
    throw ValidationError("options", "invalid field options: expected exactly 4 options");
  }
  for (std::size_t i = 0; i < 4; ++i) item.options[i] = opts[i].get<std::string>();
  item.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : derived_item_id(item);
  item.extra = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "id" && it.key() != "story" && it.key() != "question" && it.key() != "answer" &&
        it.key() != "options") {
      item.extra[it.key()] = it.value();
    }
  }
  validate(item);
}

TutoringPrompt item_to_scenario(const ComprehensionItem& item, std::uint64_t seed) {
  validate(item);
  std::vector<std::string> distractors;
  for (const auto& o : item.options) {
    if (o != item.answer) distractors.push_back(o);
  }
  Rng rng(derive_seed(seed, fast_hash64(item.id, 0)));
  const std::string& wrong = distractors[rng.uniform_index(distractors.size())];

  TutoringPrompt p;
  p.id = item.id.empty() ? derived_item_id(item) : item.id;
  p.context = item.story;
  p.question = item.question;
  p.student_answer = wrong;
  p.correct_answer = item.answer;
  p.dialogue = {{Speaker::Teacher, item.question}, {Speaker::Student, wrong}};
  validate(p);
  return p;
}

std::vector<ComprehensionItem> convert_mctest(const std::filesystem::path& tsv,
                                              const std::filesystem::path& answers) {
  std::istringstream stories(read_text_file(tsv));
  std::istringstream keys(read_text_file(answers));
  std::vector<ComprehensionItem> out;
  std::size_t line_no = 0;
  for (std::string line, key_line; std::getline(stories, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!std::getline(keys, key_line)) throw ParseError(line_no, "answer file has fewer lines than stories");
    if (!key_line.empty() && key_line.back() == '\r') key_line.pop_back();

    const auto cells = split_tabs(line);
    const auto letters = split_tabs(key_line);
    if (cells.size() < 23) throw ParseError(line_no, "expected 23 tab-separated columns");
    if (letters.size() < 4) throw ParseError(line_no, "expected 4 answer letters");

    const std::string story = replace_all(replace_all(cells[2], "\\newline", "\n"), "\\tab", "\t");
    for (std::size_t q = 0; q < 4; ++q) {
      ComprehensionItem item;
      item.id = cells[0] + ".q" + std::to_string(q + 1);
      item.story = story;
      item.question = strip_question_kind(cells[3 + 5 * q]);
      for (std::size_t o = 0; o < 4; ++o) item.options[o] = cells[4 + 5 * q + o];
      const std::string letter = trim(letters[q]);
      if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'D') {
        throw ParseError(line_no, "bad answer letter '" + letter + "'");
      }
      item.answer = item.options[static_cast<std::size_t>(letter[0] - 'A')];
      try {
        validate(item);
      } catch (const ValidationError& e) {
        throw ParseError(line_no, item.id + ": " + e.what());
      }
      out.push_back(std::move(item));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void validate(const GenerationRequest& req) {
  const bool with = req.prompt_template == PromptTemplate::WithCriteria;
  if (with && (!req.criteria || req.criteria->empty())) {
    throw ValidationError("criteria", "invalid field criteria: required for the with-criteria template");
  }
  if (!with && req.criteria) {
    throw ValidationError("criteria", "invalid field criteria: not allowed for the without-criteria template");
  }
  if (req.max_retries < 0) throw ValidationError("max_retries", "invalid field max_retries: must be >= 0");
}

std::string render_generation_prompt(const TutoringPrompt& prompt, const GenerationRequest& req) {
  validate(req);
  std::ostringstream os;
  os << "You are an English teacher tutoring a young student on a reading comprehension story.\n"
        "The student gave a wrong answer to the teacher's question. Write one short piece of "
        "teacher feedback that helps the student move from the wrong answer toward the "
        "expected answer.\n\n";
  os << "[Story]\n" << prompt.context << "\n\n";
  os << "[Question]\n" << prompt.question << "\n\n";
  os << "[Student's wrong answer]\n" << prompt.student_answer << "\n\n";
  os << "[Expected answer]\n" << prompt.correct_answer << "\n\n";
  if (req.prompt_template == PromptTemplate::WithCriteria) {
    os << "[Feedback criteria]\nThe feedback must satisfy every criterion below.\n";
    for (auto c : req.criteria->members()) {
      os << "- " << criterion_name(c) << ": " << criterion_definition(c) << "\n";
    }
    os << "\n";
  }
  os << "Reply with the feedback text only.\nFeedback:";
  return os.str();
}

FeedbackCandidate generate_feedback(const TutoringPrompt& prompt, const GenerationRequest& req,
                                    CompletionProvider& provider, const GenerationOptions& options) {
  const std::string text = render_generation_prompt(prompt, req);
  RetryPolicy policy = options.retry;
  policy.max_retries = req.max_retries;
  const std::string completion = trim(complete_with_retry(provider, text, policy, options.audit, options.sleep));
  if (completion.empty()) throw ProviderError(200, false, provider.name() + ": empty generation");

  FeedbackCandidate c;
  c.text = completion;
  c.provider = provider.name();
  if (req.prompt_template == PromptTemplate::WithCriteria) {
    c.source = FeedbackSource::LlmWithCriteria;
    c.criteria_used = req.criteria;
  } else {
    c.source = FeedbackSource::LlmWithoutCriteria;
  }
  validate(c);
  return c;
}

void to_json(json& j, const SkippedGeneration& s) {
  j = json{{"item_id", s.item_id}, {"provider", s.provider}, {"reason", s.reason}};
}

DgBuildResult build_dg(const std::vector<ComprehensionItem>& items,
                       const std::vector<std::shared_ptr<CompletionProvider>>& providers,
                       const CriterionSet& criteria, std::uint64_t seed,
                       const DgBuildOptions& options) {
  if (providers.empty()) throw PreconditionError("build_dg needs at least one provider");
  if (criteria.empty()) throw PreconditionError("build_dg needs a non-empty criteria set");

  std::vector<TutoringPrompt> prompts;
  prompts.reserve(items.size());
  std::set<std::string> ids;
  for (const auto& item : items) {
    prompts.push_back(item_to_scenario(item, seed));
    if (!ids.insert(prompts.back().id).second) {
      throw PreconditionError("duplicate item id '" + prompts.back().id + "'");
    }
  }

  struct Slot {
    std::optional<PreferencePair> pair;
    std::string error;
  };
  const std::size_t n_tasks = items.size() * providers.size();
  std::vector<Slot> slots(n_tasks);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      const std::size_t item_idx = t / providers.size();
      CompletionProvider& provider = *providers[t % providers.size()];
      try {
        GenerationRequest with{PromptTemplate::WithCriteria, criteria, provider.name(), {}, options.generation.retry.max_retries};
        GenerationRequest without{PromptTemplate::WithoutCriteria, std::nullopt, provider.name(), {},
                                  options.generation.retry.max_retries};
        auto chosen = generate_feedback(prompts[item_idx], with, provider, options.generation);
        auto rejected = generate_feedback(prompts[item_idx], without, provider, options.generation);
        slots[t].pair = pair_from_criteria_generation(prompts[item_idx], chosen, rejected);
      } catch (const std::exception& e) {
        slots[t].error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(options.max_in_flight, 1, std::max<std::size_t>(n_tasks, 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  DgBuildResult result;
  std::vector<PreferencePair> pairs;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    if (slots[t].pair) {
      pairs.push_back(std::move(*slots[t].pair));
    } else {
      result.skipped.push_back({prompts[t / providers.size()].id, providers[t % providers.size()]->name(),
                                slots[t].error});
    }
  }
  result.pair_count = pairs.size();

  std::set<std::string> pair_prompts;
  for (const auto& p : pairs) pair_prompts.insert(p.prompt.id);
  if (pair_prompts.size() >= 2) {
    result.split = split_by_prompt(pairs, options.train_fraction, seed, DatasetName::dg());
  } else {
    result.split.name = DatasetName::dg();
    result.split.train = std::move(pairs);
  }

  json provider_list = json::array();
  for (const auto& p : providers) provider_list.push_back({{"name", p->name()}, {"model", p->model()}});
  result.manifest = json{{"template_version", kTemplateVersion},
                         {"providers", provider_list},
                         {"criteria", criteria},
                         {"seed", seed},
                         {"items", items.size()},
                         {"pairs", result.pair_count},
                         {"train_fraction", options.train_fraction},
                         {"skipped", result.skipped}};
  return result;
}

}  // namespace feedrank
