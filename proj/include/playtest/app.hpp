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

#ifndef PLAYTEST_APP_HPP_
#define PLAYTEST_APP_HPP_

// Run orchestration shared by the command-line tool and the tests.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "playtest/analytics.hpp"
#include "playtest/config.hpp"
#include "playtest/trainer.hpp"

namespace playtest {

/// Loads the config's level, reporting a missing file as a ConfigError
/// "level not found: <path>".
LevelSpec load_config_level(const RunConfig& cfg);

struct CoverageWindow {
  std::uint64_t frames_begin = 0;
  std::uint64_t frames_end = 0;
  std::uint64_t visits = 0;
  double entropy = 0.0;
  std::filesystem::path heatmap;
};

struct TrainRunOptions {
  /// Null means an in-process LocalRolloutSource.
  RolloutSource* source = nullptr;
  std::function<bool()> should_stop;
  std::function<void(const std::string&)> log;
  std::function<void(const IterationReport&)> on_iteration;
};

struct TrainArtifacts {
  std::filesystem::path dir;
  TrainResult result;
  std::vector<CoverageWindow> coverage;
  std::vector<std::filesystem::path> checkpoints;
};

/// Trains one seed and writes into `dir`: run.cfg, curve.csv, coverage.csv,
/// episodes.jsonl, policy.ptfg, checkpoints/, heatmaps/.
TrainArtifacts run_training(const RunConfig& cfg, const LevelSpec& level,
                            std::uint64_t seed, const std::filesystem::path& dir,
                            const TrainRunOptions& opts = {});

/// Per-seed output directory under the run's out path.
std::filesystem::path seed_dir(const std::filesystem::path& out, std::uint64_t seed);

enum class EvalPolicy { kScripted, kRandom, kRl };

std::string_view to_string(EvalPolicy p);
EvalPolicy parse_eval_policy(std::string_view s);  // throws std::invalid_argument
/// scripted-eval / random-eval / rl-eval; rl-train evaluates as rl.
EvalPolicy eval_policy_for(RunMode mode);

struct EvalOptions {
  EvalPolicy policy = EvalPolicy::kScripted;
  std::filesystem::path checkpoint;  // rl only
  int episodes = 100;
  std::uint64_t seed = 1;
};

struct EvalReport {
  EvalPolicy policy = EvalPolicy::kScripted;
  std::string level;
  int episodes = 0;
  double mean_reward = 0.0;
  double mean_length = 0.0;  // decisions
  double mean_goals = 0.0;
  int completed = 0;  // episodes that reached every goal
  ExploitReport exploit;
  StuckReport stuck;
  HeatMap heatmap;
  double coverage_entropy = 0.0;
  std::vector<EpisodeEndRecord> records;
};

/// Deterministic evaluation: rl uses the policy mean, random draws from a
/// seeded generator, scripted follows the navmesh.
EvalReport run_eval(const RunConfig& cfg, const LevelSpec& level,
                    const EvalOptions& opts);

/// Throws ConfigError naming expected and found dimensions.
void check_checkpoint_matches(const PolicyParams& params, const TrainConfig& train);

std::string eval_text(const EvalReport& r);
/// One JSON record per line: a level summary, one per defect, one per
/// stuck cluster.
std::string eval_jsonl(const EvalReport& r);

struct ReportRow {
  std::string name;
  int seeds = 0;
  DifficultyReport difficulty;
};

/// Each directory holds curve.csv directly or seed_*/curve.csv; seeds are
/// combined with a pointwise median. Throws std::runtime_error naming the
/// directory when no curve is found or it does not parse.
std::vector<ReportRow> build_report(std::span<const std::filesystem::path> dirs);
std::string report_table(std::span<const ReportRow> rows);

}  // namespace playtest

#endif  // PLAYTEST_APP_HPP_
