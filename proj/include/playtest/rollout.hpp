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

#ifndef PLAYTEST_ROLLOUT_HPP_
#define PLAYTEST_ROLLOUT_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "playtest/analytics.hpp"
#include "playtest/env.hpp"
#include "playtest/level.hpp"
#include "playtest/navmesh.hpp"
#include "playtest/policy.hpp"
#include "playtest/ppo.hpp"

namespace playtest {

enum class ActorMode {
  kSample,  // Gaussian draw (training)
  kMean,    // policy mean, no sampling (evaluation)
  kRandom,  // uniform [-1, 1] per axis
};

/// Trajectories produced by one worker from one weights version. The worker
/// id and sequence number order chunks inside a batch.
struct Chunk {
  std::uint32_t worker_id = 0;
  std::uint32_t seq = 0;
  std::uint64_t policy_version = 0;
  std::vector<Trajectory> trajectories;  // one per env instance

  std::size_t decisions() const;
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

/// Sorts by (worker id, sequence number).
void order_chunks(std::vector<Chunk>& chunks);

/// Runs a fixed set of env instances, auto-resetting finished episodes. Env
/// stepping is single threaded; the policy forward pass is batched across
/// instances.
class RolloutWorker {
 public:
  RolloutWorker(const LevelSpec& level, EnvConfig env, int num_envs,
                int steps_per_env, std::uint64_t seed);

  /// `steps_per_env` decisions on every instance.
  std::vector<Trajectory> collect(const PolicyParams& policy,
                                  ActorMode mode = ActorMode::kSample);

  int num_envs() const { return static_cast<int>(states_.size()); }
  int steps_per_env() const { return steps_per_env_; }
  std::uint64_t decisions() const { return decisions_; }

 private:
  const LevelSpec* level_;
  EnvConfig env_;
  int steps_per_env_;
  std::uint64_t seed_;
  Rng rng_;
  std::vector<WorldState> states_;
  std::vector<Observation> obs_;
  std::uint64_t decisions_ = 0;
};

/// Converts a policy-less scripted/random actor run into trajectories, one
/// episode each, for the evaluation harness.
using ActionFn = std::function<Action(const WorldState&, const Observation&)>;
Trajectory run_episode(const LevelSpec& level, const EnvConfig& env,
                       const ActionFn& act, std::uint64_t seed = 0);

/// Rebuilds episode boundaries and returns across chunks, keyed by
/// (worker, env instance), so split episodes are accounted once.
class EpisodeTracker {
 public:
  explicit EpisodeTracker(int action_repeat) : action_repeat_(action_repeat) {}

  /// Consumes a chunk whose first decision follows `frames_before` env
  /// frames; appends finished episodes to `out`.
  void consume(const Chunk& chunk, std::uint64_t frames_before,
               std::vector<EpisodeEndRecord>& out);

 private:
  struct Slot {
    double ret = 0.0;
    int decisions = 0;
    int goals = 0;
  };
  int action_repeat_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Slot> slots_;
};

}  // namespace playtest

#endif  // PLAYTEST_ROLLOUT_HPP_
