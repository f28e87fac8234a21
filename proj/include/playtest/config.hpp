// Copyright 2026 The Playtest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PLAYTEST_CONFIG_HPP_
#define PLAYTEST_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "playtest/env.hpp"
#include "playtest/ppo.hpp"

namespace playtest {

enum class RunMode { kRlTrain, kRlEval, kScriptedEval, kRandomEval };

std::string_view to_string(RunMode m);
RunMode parse_run_mode(std::string_view s);  // throws std::invalid_argument

struct AnalyticsConfig {
  std::uint64_t heatmap_interval = 100'000;  // env frames between snapshots
  double heatmap_cell = 0.5;
  int stuck_min_count = 3;
  int eval_episodes = 100;
  bool record_episodes = true;  // episodes.jsonl
  bool record_timing = false;   // wall-clock column in curve.csv

  friend bool operator==(const AnalyticsConfig&, const AnalyticsConfig&) = default;
};

struct NetConfig {
  std::string listen = "127.0.0.1:7878";
  std::string connect = "127.0.0.1:7878";
  int staleness_limit = 1;
  int worker_index = 0;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// One declarative run description: `key = value` lines under `[section]`
/// headers, `#` comments, blank lines ignored.
struct RunConfig {
  std::string level;  // as written; relative paths resolve against base_dir
  RunMode mode = RunMode::kRlTrain;
  std::string out = "runs/out";
  std::string checkpoint;  // rl-eval only
  std::vector<std::uint64_t> seeds{1};
  EnvConfig env;
  TrainConfig train;
  AnalyticsConfig analytics;
  NetConfig net;

  std::filesystem::path base_dir;  // not serialized

  std::filesystem::path level_path() const;
  std::filesystem::path out_path() const;
  std::filesystem::path checkpoint_path() const;

  /// Value checks that do not touch the filesystem.
  void validate() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

RunConfig parse_run_config(std::string_view text);
std::string to_text(const RunConfig& cfg);
/// Reads and parses; base_dir becomes the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace playtest

#endif  // PLAYTEST_CONFIG_HPP_
