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

#include <algorithm>
#include <set>

#include "doctest.h"
#include "feedrank/hash.hpp"
#include "feedrank/jsonl.hpp"
#include "feedrank/pairbuilder.hpp"
#include "feedrank/rng.hpp"
#include "feedrank/types.hpp"
#include "fixtures.hpp"

using namespace feedrank;
using feedrank::testing::sample_prompt;
using feedrank::testing::sample_ranked;

TEST_CASE("prompt round-trips through JSON and keeps unknown fields") {
  TutoringPrompt p = sample_prompt();
  p.extra["story_id"] = "mc500.dev.3";
  json j = p;
  CHECK(j["story_id"] == "mc500.dev.3");
  auto back = j.get<TutoringPrompt>();
  CHECK(back == p);
}

TEST_CASE("prompt validation names the field") {
  TutoringPrompt p = sample_prompt();
  p.student_answer = "  To the lake. ";
  p.dialogue.back().utterance = p.student_answer;
  CHECK_THROWS_WITH_AS(validate(p), doctest::Contains("student_answer"), ValidationError);

  p = sample_prompt();
  p.dialogue.back().utterance = "something else";
  try {
    validate(p);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "dialogue");
  }

  json j = sample_prompt();
  j.erase("question");
  try {
    (void)j.get<TutoringPrompt>();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "question");
    CHECK(std::string(e.what()).find("missing field question") != std::string::npos);
  }
}

TEST_CASE("nested field paths in error messages") {
  json j = sample_ranked();
  j["candidates"][2].erase("text");
  try {
    (void)j.get<RankedCandidateSet>();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "candidates[2].text");
  }
}

TEST_CASE("criterion sets") {
  CHECK(CriterionSet::all().size() == 5);
  CHECK(CriterionSet::essential().is_essential_pair());
  CHECK(CriterionSet::parse("revealing, correct") == CriterionSet::essential());
  CHECK(CriterionSet::parse("all") == CriterionSet::all());
  auto names = CriterionSet::parse("encouragement,correct").names();
  CHECK(names == std::vector<std::string>{"Correct", "Encouragement"});
  CHECK_THROWS_AS(CriterionSet::parse("correct,correct"), ValidationError);
  CHECK_THROWS_AS(CriterionSet::parse("bogus"), ValidationError);
  CHECK_THROWS_AS(CriterionSet::parse(""), ValidationError);
  CHECK(criterion_from_name("GUIDANCE") == Criterion::Guidance);
  for (auto c : CriterionSet::all().members()) CHECK_FALSE(criterion_definition(c).empty());
}

TEST_CASE("candidate criteria_used is tied to the source") {
  FeedbackCandidate c;
  c.text = "hint";
  c.source = FeedbackSource::LlmWithCriteria;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c.criteria_used = CriterionSet::essential();
  CHECK_NOTHROW(validate(c));
  c.source = FeedbackSource::Gpt4;
  CHECK_THROWS_AS(validate(c), ValidationError);

  json j = {{"text", "x"}, {"source", "tutor-bot"}};
  auto other = j.get<FeedbackCandidate>();
  CHECK(other.source == FeedbackSource::Other);
  CHECK(json(other)["source"] == "tutor-bot");
}

TEST_CASE("ranked set invariants") {
  auto s = sample_ranked();
  CHECK_NOTHROW(validate(s));
  s.ranking = {0, 1, 2, 3, 3};
  CHECK_THROWS_AS(validate(s), ValidationError);
  s = sample_ranked();
  s.candidates.pop_back();
  s.ranking = {0, 1, 2, 3};
  CHECK_THROWS_AS(validate(s), ValidationError);  // imports need five
  s.rank_source = RankSource::HumanAnnotation;
  CHECK_NOTHROW(validate(s));
  auto back = json(sample_ranked()).get<RankedCandidateSet>();
  CHECK(back == sample_ranked());
}

TEST_CASE("pair id is the length-prefixed BLAKE2b-128 digest") {
  // Reference digests from an independent BLAKE2b implementation.
  CHECK(compute_pair_id("prompt-1", "good", "bad") == "0fe99503636e87ff88d97148a3fcf5ef");
  CHECK(content_hash128({"ab", "c"}) == "4826ed043ab3cdec576d8541fa5d5a80");
  CHECK(content_hash128({"a", "bc"}) == "f14abc19c330e936bb9c8506d69bac9b");
  CHECK(content_hash128(std::initializer_list<std::string_view>{}) == "cae66941d9efbd404e4d88758ea67670");
}

TEST_CASE("pair validation") {
  auto s = sample_ranked();
  auto p = make_preference_pair(s.prompt, s.candidates[0], s.candidates[1], PairOrigin::DmRanked);
  CHECK(p.pair_id == compute_pair_id(p.prompt.id, p.chosen.text, p.rejected.text));
  auto j = json(p);
  CHECK(j.get<PreferencePair>() == p);
  j["pair_id"] = "00";
  CHECK_THROWS_AS((void)j.get<PreferencePair>(), ValidationError);
  CHECK_THROWS_AS(make_preference_pair(s.prompt, s.candidates[0], s.candidates[0], PairOrigin::DmRanked),
                  ValidationError);
  CHECK_THROWS_AS(make_preference_pair(s.prompt, s.candidates[0], s.candidates[1], PairOrigin::CrossContext),
                  ValidationError);
  CHECK_THROWS_AS(make_preference_pair(s.prompt, s.candidates[0], s.candidates[1], PairOrigin::CrossContext,
                                       s.prompt.id),
                  ValidationError);
}

TEST_CASE("dataset names") {
  CHECK(DatasetName::parse("DM") == DatasetName::dm());
  CHECK(DatasetName::parse("DA(0.05)") == DatasetName::da(0.05));
  CHECK(DatasetName::da(0.05).str() == "DA(0.05)");
  CHECK(DatasetName::da(1).str() == "DA(1)");
  CHECK_THROWS_AS(DatasetName::parse("DA()"), ValidationError);
  CHECK_THROWS_AS(DatasetName::parse("DX"), ValidationError);
  DatasetSplit bad{{}, {}, DatasetName::da(1.5)};
  CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("JSONL errors carry the line number") {
  auto s = sample_ranked();
  std::string text = json(s).dump() + "\n\n{not json}\n";
  try {
    (void)parse_jsonl<RankedCandidateSet>(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  json broken = s;
  broken["ranking"] = {0, 0, 1, 2, 3};
  text = json(s).dump() + "\n" + broken.dump() + "\n";
  try {
    (void)parse_jsonl<RankedCandidateSet>(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("ranking") != std::string::npos);
  }
  auto ok = parse_jsonl<RankedCandidateSet>(json(s).dump() + "\n\n" + json(s).dump());
  CHECK(ok.size() == 2);
}

TEST_CASE("split directories round-trip and report counts") {
  auto dir = feedrank::testing::temp_dir("split");
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 4; ++i) {
    auto ps = pairs_from_ranking(sample_ranked("p" + std::to_string(i)));
    pairs.insert(pairs.end(), ps.begin(), ps.end());
  }
  auto split = split_by_prompt(pairs, 0.75, 3, DatasetName::dm());
  save_split(dir, split, json{{"seed", 3}});
  auto back = load_split(dir);
  CHECK(back.train == split.train);
  CHECK(back.test == split.test);
  CHECK(back.name == DatasetName::dm());
  auto manifest = load_json_file(dir / "manifest.json").get<DatasetManifest>();
  CHECK(manifest.train_count == 30);
  CHECK(manifest.test_count == 10);
  CHECK(manifest.extra["seed"] == 3);

  auto stats = validate_stats(back, {30, 11});
  CHECK(stats.train.matches());
  CHECK(stats.test.delta() == -1);
  CHECK_FALSE(stats.all_match());
  bool warned = false;
  for (const auto& l : stats.lines()) warned |= l.rfind("WARN", 0) == 0;
  CHECK(warned);

  // Pair-level splits load; leakage is reported rather than rejected.
  DatasetSplit leaky{{pairs[0]}, {pairs[1]}, DatasetName::dm()};
  save_split(dir / "leaky", leaky);
  auto loaded = load_split(dir / "leaky");
  CHECK(validate_stats(loaded, {1, 1}).leaked_prompt_ids == std::vector<std::string>{"p0"});
  CHECK_THROWS_AS(validate(loaded), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("base64 and rng determinism") {
  std::vector<std::uint8_t> bytes = {0, 1, 2, 250, 251, 252, 253};
  auto enc = base64_encode(bytes);
  CHECK(enc == "AAEC+vv8/Q==");
  auto dec = base64_decode(enc);
  CHECK(std::vector<std::uint8_t>(dec.begin(), dec.end()) == bytes);

  Rng a(17), b(17);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng r(5);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 6000; ++i) counts[r.uniform_index(6)]++;
  for (int c : counts) CHECK(c == doctest::Approx(1000).epsilon(0.1));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}
