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

#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "feedrank/jsonl.hpp"
#include "feedrank/provider.hpp"
#include "feedrank/scenario.hpp"
#include "fixtures.hpp"
#include "httplib.h"

using namespace feedrank;
using namespace std::chrono_literals;
using feedrank::testing::fake_llm;
using feedrank::testing::sample_items;

TEST_CASE("item to scenario picks a seeded distractor") {
  auto item = sample_items(1)[0];
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto p = item_to_scenario(item, seed);
    CHECK(p.correct_answer == item.answer);
    CHECK(p.student_answer != item.answer);
    CHECK(std::find(item.options.begin(), item.options.end(), p.student_answer) != item.options.end());
    CHECK(p.dialogue.back().utterance == p.student_answer);
    CHECK(p == item_to_scenario(item, seed));
    seen.insert(p.student_answer);
  }
  CHECK(seen.size() == 3);
}

TEST_CASE("comprehension item validation and id derivation") {
  json j = {{"story", "s"}, {"question", "q"}, {"answer", "a"}, {"options", {"a", "b", "c", "d"}}};
  auto item = j.get<ComprehensionItem>();
  CHECK(item.id.rfind("item-", 0) == 0);
  CHECK(j.get<ComprehensionItem>().id == item.id);
  j["answer"] = "z";
  CHECK_THROWS_AS((void)j.get<ComprehensionItem>(), ValidationError);
  j["answer"] = "a";
  j["options"] = {"a", "a", "c", "d"};
  CHECK_THROWS_AS((void)j.get<ComprehensionItem>(), ValidationError);
  j["options"] = {"a", "b", "c"};
  CHECK_THROWS_AS((void)j.get<ComprehensionItem>(), ValidationError);
}

TEST_CASE("MCTest TSV conversion") {
  auto dir = feedrank::testing::temp_dir("mctest");
  std::string row = "mc160.dev.0\tAuthor: x\tTim had a dog.\\newlineThe dog was red.";
  for (int q = 0; q < 4; ++q) {
    row += "\tone: Question " + std::to_string(q) + "?";
    for (char o = 'A'; o <= 'D'; ++o) row += std::string("\topt") + o + std::to_string(q);
  }
  {
    std::ofstream(dir / "s.tsv") << row << "\n";
    std::ofstream(dir / "s.ans") << "A\tB\tC\tD\n";
  }
  auto items = convert_mctest(dir / "s.tsv", dir / "s.ans");
  REQUIRE(items.size() == 4);
  CHECK(items[0].id == "mc160.dev.0.q1");
  CHECK(items[0].story == "Tim had a dog.\nThe dog was red.");
  CHECK(items[0].question == "Question 0?");
  CHECK(items[1].answer == "optB1");
  CHECK(items[3].answer == "optD3");
  {
    std::ofstream(dir / "bad.ans") << "A\tB\tE\tD\n";
  }
  CHECK_THROWS_AS(convert_mctest(dir / "s.tsv", dir / "bad.ans"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("templates differ only in the criteria block") {
  auto prompt = item_to_scenario(sample_items(1)[0], 3);
  GenerationRequest with{PromptTemplate::WithCriteria, CriterionSet::essential(), "p", {}, 3};
  GenerationRequest without{PromptTemplate::WithoutCriteria, std::nullopt, "p", {}, 3};
  const auto a = render_generation_prompt(prompt, with);
  const auto b = render_generation_prompt(prompt, without);
  CHECK(a == render_generation_prompt(prompt, with));
  const auto start = a.find("[Feedback criteria]");
  REQUIRE(start != std::string::npos);
  const auto end = a.find("\n\n", start) + 2;
  CHECK(a.substr(0, start) + a.substr(end) == b);
  const std::string block = a.substr(start, end - start);
  CHECK(block.find("Correct:") != std::string::npos);
  CHECK(block.find("Revealing:") != std::string::npos);
  CHECK(block.find("Guidance") == std::string::npos);
  for (auto c : CriterionSet::all().members()) {
    GenerationRequest one{PromptTemplate::WithCriteria, CriterionSet{c}, "p", {}, 3};
    CHECK(render_generation_prompt(prompt, one).find(std::string(criterion_definition(c))) != std::string::npos);
  }
  GenerationRequest broken{PromptTemplate::WithoutCriteria, CriterionSet::essential(), "p", {}, 3};
  CHECK_THROWS_AS(render_generation_prompt(prompt, broken), ValidationError);
}

TEST_CASE("retry with exponential backoff on transient failures") {
  std::vector<std::chrono::milliseconds> sleeps;
  Sleeper fake = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
  int calls = 0;
  FunctionProvider flaky("flaky", "m", [&](const std::string&) -> std::string {
    if (++calls < 3) throw ProviderError(429, true, "slow down");
    return "ok";
  });
  AuditLog audit;
  RetryPolicy policy;
  policy.initial_backoff = 100ms;
  CHECK(complete_with_retry(flaky, "x", policy, &audit, fake) == "ok");
  CHECK(sleeps == std::vector<std::chrono::milliseconds>{100ms, 200ms});
  auto entries = audit.entries();
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].outcome == "retry");
  CHECK(entries[0].status == 429);
  CHECK(entries[2].outcome == "ok");
  CHECK(entries[2].attempt == 3);
  CHECK(entries[0].request_hash == request_hash("m", "x"));

  sleeps.clear();
  calls = -100;
  CHECK_THROWS_AS(complete_with_retry(flaky, "x", policy, nullptr, fake), ProviderError);
  CHECK(sleeps.size() == 3);

  FunctionProvider fatal("fatal", "m", [&](const std::string&) -> std::string {
    throw ProviderError(401, false, "bad key");
  });
  sleeps.clear();
  CHECK_THROWS_AS(complete_with_retry(fatal, "x", policy, nullptr, fake), ProviderError);
  CHECK(sleeps.empty());

  policy.max_backoff = 250ms;
  CHECK(policy.backoff(1) == 100ms);
  CHECK(policy.backoff(3) == 250ms);
  CHECK(is_transient_status(503));
  CHECK(is_transient_status(0));
  CHECK_FALSE(is_transient_status(400));
}

TEST_CASE("recording then fixture replay") {
  auto dir = feedrank::testing::temp_dir("fixtures");
  auto inner = fake_llm("alpha");
  RecordingProvider rec(inner, dir);
  const auto text = rec.complete("hello");
  FixtureProvider replay("alpha", "alpha-model", dir);
  CHECK(replay.complete("hello") == text);
  try {
    replay.complete("unseen");
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK_FALSE(e.transient());
  }
  write_text_file(dir / (request_hash("alpha-model", "plain") + ".txt"), "from txt");
  CHECK(replay.complete("plain") == "from txt");

  write_json_file(dir / "providers.json",
                  json{{"providers", {{{"name", "alpha"}, {"kind", "fixture"}, {"model", "alpha-model"},
                                       {"fixture_dir", "."}}}}});
  auto loaded = load_providers(dir / "providers.json");
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0]->complete("hello") == text);
  std::filesystem::remove_all(dir);
}

TEST_CASE("build_dg with a fake provider") {
  auto items = sample_items(20);
  std::vector<std::shared_ptr<CompletionProvider>> providers = {fake_llm("a"), fake_llm("b")};
  DgBuildOptions opts;
  opts.generation.sleep = [](std::chrono::milliseconds) {};
  auto result = build_dg(items, providers, CriterionSet::essential(), 5, opts);
  CHECK(result.pair_count == 40);
  CHECK(result.skipped.empty());
  CHECK(result.split.train.size() + result.split.test.size() == 40);
  CHECK(result.split.test.size() == 4);  // two prompts, two providers each
  CHECK(leaked_prompt_ids(result.split).empty());
  for (const auto& p : result.split.train) {
    CHECK(p.origin == PairOrigin::DgCriteria);
    CHECK(p.chosen.source == FeedbackSource::LlmWithCriteria);
    CHECK(p.rejected.source == FeedbackSource::LlmWithoutCriteria);
    CHECK(p.chosen.provider == p.rejected.provider);
  }
  CHECK(result.manifest["template_version"] == std::string(kTemplateVersion));
  CHECK(result.manifest["criteria"] == json({"Correct", "Revealing"}));

  opts.max_in_flight = 1;
  auto serial = build_dg(items, providers, CriterionSet::essential(), 5, opts);
  CHECK(serial.split.train == result.split.train);
  CHECK(serial.split.test == result.split.test);
}

TEST_CASE("build_dg skips failing generations") {
  auto items = sample_items(6);
  auto broken = std::make_shared<FunctionProvider>("broken", "m", [](const std::string& prompt) -> std::string {
    if (prompt.find("Story 2:") != std::string::npos) throw ProviderError(400, false, "refused");
    return std::to_string(prompt.find("[Feedback criteria]") != std::string::npos) + prompt.substr(0, 40);
  });
  DgBuildOptions opts;
  opts.generation.sleep = [](std::chrono::milliseconds) {};
  auto result = build_dg(items, {broken}, CriterionSet::all(), 1, opts);
  CHECK(result.pair_count == 5);
  REQUIRE(result.skipped.size() == 1);
  CHECK(result.skipped[0].item_id == "story2.q1");
  CHECK(result.skipped[0].provider == "broken");
  CHECK(result.manifest["skipped"].size() == 1);
}

TEST_CASE("HTTP provider against a local mock") {
  httplib::Server server;
  std::atomic<int> hits{0};
  json last_body;
  std::string last_auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    last_body = json::parse(req.body);
    last_auth = req.get_header_value("Authorization");
    if (n == 1) {
      res.status = 503;
      res.set_content("busy", "text/plain");
      return;
    }
    json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "  mock feedback  "}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("FEEDRANK_TEST_KEY", "secret", 1);
  HttpProviderConfig cfg;
  cfg.name = "mock";
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "mock-1";
  cfg.api_key_env = "FEEDRANK_TEST_KEY";
  cfg.decoding = {{"temperature", 0.0}};
  cfg.timeout = 5000ms;
  HttpProvider provider(cfg);

  auto prompt = item_to_scenario(sample_items(1)[0], 0);
  GenerationRequest req{PromptTemplate::WithCriteria, CriterionSet::essential(), "mock", {}, 2};
  GenerationOptions opts;
  int slept = 0;
  opts.sleep = [&](std::chrono::milliseconds) { ++slept; };
  auto cand = generate_feedback(prompt, req, provider, opts);
  CHECK(cand.text == "mock feedback");
  CHECK(cand.provider == "mock");
  CHECK(cand.source == FeedbackSource::LlmWithCriteria);
  CHECK(hits == 2);
  CHECK(slept == 1);
  CHECK(last_auth == "Bearer secret");
  CHECK(last_body["model"] == "mock-1");
  CHECK(last_body["temperature"] == 0.0);
  CHECK(last_body["messages"][0]["content"] == render_generation_prompt(prompt, req));

  server.stop();
  t.join();

  HttpProviderConfig dead = cfg;
  dead.base_url = "http://127.0.0.1:1";
  dead.timeout = 500ms;
  HttpProvider unreachable(dead);
  try {
    unreachable.complete("x");
    FAIL("expected ProviderError");
  } catch (const ProviderError& e) {
    CHECK(e.status() == 0);
    CHECK(e.transient());
  }
}
