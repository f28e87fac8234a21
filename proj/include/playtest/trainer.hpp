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

#ifndef PLAYTEST_TRAINER_HPP_
#define PLAYTEST_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "playtest/analytics.hpp"
#include "playtest/rollout.hpp"

namespace playtest {

/// Where training data comes from. publish() hands out a new weights
/// snapshot; collect() blocks until at least `min_decisions` decisions are
/// available and returns them ordered by (worker, seq). An empty result
/// means the source was stopped and training ends.
class RolloutSource {
 public:
  virtual ~RolloutSource() = default;
  virtual void publish(const PolicyParams& snapshot) = 0;
  virtual std::vector<Chunk> collect(std::size_t min_decisions) = 0;
  /// Called once when training ends.
  virtual void finish() {}
};

/// In-process source: a single RolloutWorker with id 0.
class LocalRolloutSource : public RolloutSource {
 public:
  LocalRolloutSource(const LevelSpec& level, const EnvConfig& env,
                     const TrainConfig& train, std::uint64_t worker_seed);

  void publish(const PolicyParams& snapshot) override;
  std::vector<Chunk> collect(std::size_t min_decisions) override;

 private:
  RolloutWorker worker_;
  PolicyParams snapshot_;
  std::uint32_t seq_ = 0;
};

/// Decisions each env instance runs per chunk so that one chunk from one
/// worker fills a horizon.
int steps_per_env(const TrainConfig& cfg);

/// Seed streams derived from the run seed.
std::uint64_t params_seed(std::uint64_t run_seed);
std::uint64_t shuffle_seed(std::uint64_t run_seed);
std::uint64_t worker_seed(std::uint64_t run_seed, std::uint32_t worker_index);

struct IterationReport {
  int iteration = 0;
  std::uint64_t frames_before = 0;
  std::uint64_t frames_after = 0;
  const std::vector<Chunk>* chunks = nullptr;
  const std::vector<EpisodeEndRecord>* finished = nullptr;
  const CurvePoint* curve_point = nullptr;
  const UpdateStats* stats = nullptr;
  const PolicyParams* params = nullptr;  // after the update
};

struct TrainHooks {
  std::function<void(const IterationReport&)> on_iteration;
  /// Called with the initial params, every checkpoint_interval iterations,
  /// and once more at the end if the final version was not yet saved.
  std::function<void(const PolicyParams&)> on_checkpoint;
  /// Wall-clock throughput in the curve's steps_per_sec column. Off by
  /// default so curves are byte-reproducible.
  bool record_timing = false;
  /// Polled between iterations; returning true stops training early.
  std::function<bool()> should_stop;
};

struct TrainResult {
  PolicyParams params;
  std::vector<CurvePoint> curve;
  std::vector<EpisodeEndRecord> episodes;
  std::uint64_t env_frames = 0;
  int iterations = 0;
  Throughput throughput;
};

/// Collect/update loop until the frame budget is spent. Each published
/// snapshot is the float32-rounded params, which is what actors run.
TrainResult train(const LevelSpec& level, const EnvConfig& env,
                  const TrainConfig& cfg, std::uint64_t seed,
                  RolloutSource& source, const TrainHooks& hooks = {});

/// Trailing window for the curve's mean episode reward.
inline constexpr std::size_t kRewardWindow = 100;

}  // namespace playtest

#endif  // PLAYTEST_TRAINER_HPP_
