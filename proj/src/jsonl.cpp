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

#include "feedrank/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "feedrank/scenario.hpp"

namespace feedrank {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("io", "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

json load_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("parse", path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

template <class Record>
std::vector<Record> parse_jsonl(const std::string& text) {
  std::vector<Record> out;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      out.push_back(j.get<Record>());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

template <class Record>
std::vector<Record> load_jsonl(const fs::path& path) {
  return parse_jsonl<Record>(read_text_file(path));
}

template <class Record>
std::string to_jsonl(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) {
    out += json(r).dump();
    out += '\n';
  }
  return out;
}

template <class Record>
void write_jsonl(const fs::path& path, const std::vector<Record>& records) {
  write_text_file(path, to_jsonl(records));
}

#define FEEDRANK_INSTANTIATE_JSONL(T)                                  \
  template std::vector<T> parse_jsonl<T>(const std::string&);          \
  template std::vector<T> load_jsonl<T>(const fs::path&);              \
  template std::string to_jsonl<T>(const std::vector<T>&);             \
  template void write_jsonl<T>(const fs::path&, const std::vector<T>&);

FEEDRANK_INSTANTIATE_JSONL(TutoringPrompt)
FEEDRANK_INSTANTIATE_JSONL(FeedbackCandidate)
FEEDRANK_INSTANTIATE_JSONL(RankedCandidateSet)
FEEDRANK_INSTANTIATE_JSONL(PreferencePair)
FEEDRANK_INSTANTIATE_JSONL(ComprehensionItem)
FEEDRANK_INSTANTIATE_JSONL(json)

#undef FEEDRANK_INSTANTIATE_JSONL

// ---------------------------------------------------------------------------

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"name", m.name},
           {"counts", {{"train", m.train_count}, {"test", m.test_count}}},
           {"split", {{"train_fraction", m.train_fraction}}}};
  if (!m.extra.empty()) j["provenance"] = m.extra;
}

void from_json(const json& j, DatasetManifest& m) {
  m.name = j.at("name").get<std::string>();
  m.train_count = j.at("counts").at("train").get<std::size_t>();
  m.test_count = j.at("counts").at("test").get<std::size_t>();
  m.train_fraction = j.value("split", json::object()).value("train_fraction", 0.0);
  m.extra = j.value("provenance", json::object());
}

DatasetManifest manifest_for(const DatasetSplit& split, json extra) {
  DatasetManifest m;
  m.name = split.name.str();
  m.train_count = split.train.size();
  m.test_count = split.test.size();
  const auto total = m.train_count + m.test_count;
  m.train_fraction = total == 0 ? 0.0 : static_cast<double>(m.train_count) / static_cast<double>(total);
  m.extra = std::move(extra);
  return m;
}

void save_split(const fs::path& dir, const DatasetSplit& split, json extra) {
  fs::create_directories(dir);
  write_jsonl(dir / "train.jsonl", split.train);
  write_jsonl(dir / "test.jsonl", split.test);
  write_json_file(dir / "manifest.json", manifest_for(split, std::move(extra)));
}

DatasetSplit load_split(const fs::path& dir) {
  DatasetSplit split;
  if (fs::exists(dir / "manifest.json")) {
    split.name = DatasetName::parse(load_json_file(dir / "manifest.json").value("name", "DM"));
  }
  split.train = load_jsonl<PreferencePair>(dir / "train.jsonl");
  if (fs::exists(dir / "test.jsonl")) split.test = load_jsonl<PreferencePair>(dir / "test.jsonl");
  return split;
}

// ---------------------------------------------------------------------------

std::vector<std::string> StatsReport::lines() const {
  std::vector<std::string> out;
  auto line = [&](const char* side, const CountCheck& c) {
    std::ostringstream os;
    os << (c.matches() ? "OK   " : "WARN ") << name << " " << side << ": actual " << c.actual
       << ", expected " << c.expected;
    if (!c.matches()) os << " (delta " << (c.delta() > 0 ? "+" : "") << c.delta() << ")";
    out.push_back(os.str());
  };
  line("train", train);
  line("test", test);
  if (!leaked_prompt_ids.empty()) {
    out.push_back("WARN " + name + ": " + std::to_string(leaked_prompt_ids.size()) +
                  " prompt id(s) shared by train and test");
  }
  return out;
}

void to_json(json& j, const StatsReport& r) {
  auto side = [](const CountCheck& c) {
    return json{{"actual", c.actual}, {"expected", c.expected}, {"delta", c.delta()},
                {"match", c.matches()}};
  };
  j = json{{"name", r.name},
           {"train", side(r.train)},
           {"test", side(r.test)},
           {"all_match", r.all_match()},
           {"leaked_prompt_ids", r.leaked_prompt_ids}};
}

StatsReport validate_stats(const DatasetSplit& split, const ExpectedCounts& expected) {
  StatsReport r;
  r.name = split.name.str();
  r.train = {split.train.size(), expected.train};
  r.test = {split.test.size(), expected.test};
  r.leaked_prompt_ids = leaked_prompt_ids(split);
  return r;
}

}  // namespace feedrank
