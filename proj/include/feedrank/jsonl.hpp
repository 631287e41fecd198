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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "feedrank/error.hpp"
#include "feedrank/types.hpp"

namespace feedrank {

namespace fs = std::filesystem;

/// Reads one JSON object per line. Blank lines are skipped. Every record is
/// validated; failures surface as ParseError carrying the 1-based line.
template <class Record>
std::vector<Record> load_jsonl(const fs::path& path);

/// Parses JSONL already held in memory (same contract as load_jsonl).
template <class Record>
std::vector<Record> parse_jsonl(const std::string& text);

/// Writes one compact JSON object per line, '\n'-terminated.
template <class Record>
void write_jsonl(const fs::path& path, const std::vector<Record>& records);

template <class Record>
std::string to_jsonl(const std::vector<Record>& records);

std::string read_text_file(const fs::path& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_text_file(const fs::path& path, const std::string& contents);

json load_json_file(const fs::path& path);
/// Pretty-printed with two-space indent and a trailing newline.
void write_json_file(const fs::path& path, const json& value);

// ---------------------------------------------------------------------------
// Dataset directories: train.jsonl, test.jsonl and manifest.json.

struct DatasetManifest {
  std::string name;  // DatasetName::str()
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double train_fraction = 0.0;  // train / (train + test)
  json extra = json::object();  // provenance: seeds, providers, ratios, ...
};

void to_json(json& j, const DatasetManifest& m);
void from_json(const json& j, DatasetManifest& m);

DatasetManifest manifest_for(const DatasetSplit& split, json extra = json::object());

void save_split(const fs::path& dir, const DatasetSplit& split, json extra = json::object());
/// Loads a dataset directory. Leakage across the split is not rejected here
/// (published splits may be pair-level); use validate_stats to report it.
DatasetSplit load_split(const fs::path& dir);

// ---------------------------------------------------------------------------
// Count validation

struct ExpectedCounts {
  std::size_t train = 0;
  std::size_t test = 0;

  static ExpectedCounts published_dm() { return {5025, 475}; }
  static ExpectedCounts published_dg() { return {3996, 444}; }
};

struct CountCheck {
  std::size_t actual = 0;
  std::size_t expected = 0;
  long long delta() const { return static_cast<long long>(actual) - static_cast<long long>(expected); }
  bool matches() const { return actual == expected; }
};

struct StatsReport {
  std::string name;
  CountCheck train;
  CountCheck test;
  std::vector<std::string> leaked_prompt_ids;

  bool all_match() const { return train.matches() && test.matches(); }
  /// Human-readable lines; mismatches are prefixed with "WARN".
  std::vector<std::string> lines() const;
};

void to_json(json& j, const StatsReport& r);

/// Reports actual vs expected counts. Never throws on mismatch.
StatsReport validate_stats(const DatasetSplit& split, const ExpectedCounts& expected);

}  // namespace feedrank
