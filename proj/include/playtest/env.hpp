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

#ifndef PLAYTEST_ENV_HPP_
#define PLAYTEST_ENV_HPP_

#include <array>
#include <cstdint>

#include "playtest/level.hpp"
#include "playtest/sim.hpp"

namespace playtest {

struct EnvConfig {
  int action_repeat = 3;
  int episode_length = 1000;  // decisions
  // Non-positive values resolve to defaults derived from the level/physics:
  // distance -> bounds diagonal, reward scale -> 1 / (walk_speed * dt * repeat).
  double distance_normalizer = 0.0;
  double velocity_normalizer = 10.0;
  double ray_range = 15.0;
  double reward_scale = 0.0;
  double goal_bonus = 1.0;
  PhysicsConfig physics;

  double distance_scale(const LevelSpec& level) const;
  double shaping_scale() const;
  void validate() const;
};

/// Fixed 27-slot sensor vector; see the k* offsets for the layout.
struct Observation {
  static constexpr int kSize = 27;
  static constexpr int kRelGoal = 0;      // 3, agent frame
  static constexpr int kVelocity = 3;     // 3, agent frame
  static constexpr int kOrientation = 6;  // 4, quaternion (w, x, y, z)
  static constexpr int kGoalDistance = 10;
  static constexpr int kClimbing = 11;
  static constexpr int kGrounded = 12;
  static constexpr int kJumpCooldown = 13;
  static constexpr int kResetTimer = 14;
  static constexpr int kRays = 15;  // 12
  static constexpr int kNumRays = 12;

  std::array<double, kSize> values{};

  double operator[](int i) const { return values[i]; }
};

enum class Termination : std::uint8_t { kNone = 0, kTimeout = 1, kAllGoals = 2 };

/// The 12 ray directions for an agent with the given yaw: 8 horizontal at 45
/// degree steps starting at the facing direction, forward pitched up and
/// down by 45 degrees, straight up, straight down.
std::array<Vec3, Observation::kNumRays> ray_rig(double yaw);

WorldState env_reset(const LevelSpec& level, const EnvConfig& cfg,
                     std::uint64_t seed = 0);

Observation observe(const LevelSpec& level, const WorldState& state,
                    const EnvConfig& cfg);

/// Distance-shaped reward for one physics tick; both states must reference
/// the same active goal.
double reward(const LevelSpec& level, const WorldState& prev,
              const WorldState& next, const StepInfo& info,
              const EnvConfig& cfg);

struct EnvStep {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  Termination reason = Termination::kNone;
  // Flags OR-ed across the repeated physics ticks.
  bool goal_reached = false;
  bool trap_entered = false;
  bool defect_crossed = false;
  int physics_steps = 0;
};

/// One decision: applies `action` for cfg.action_repeat physics ticks (fewer
/// if the last goal is reached mid-repeat).
EnvStep env_step(const LevelSpec& level, WorldState& state, const Action& action,
                 const EnvConfig& cfg);

/// Decision-rate bookkeeping. Interactions are counted as decisions times
/// the action repeat.
struct Throughput {
  std::uint64_t decisions = 0;
  int action_repeat = 1;
  double seconds = 0.0;

  std::uint64_t interactions() const {
    return decisions * static_cast<std::uint64_t>(action_repeat);
  }
  double decisions_per_sec() const {
    return seconds > 0.0 ? static_cast<double>(decisions) / seconds : 0.0;
  }
  double interactions_per_sec() const {
    return decisions_per_sec() * action_repeat;
  }
};

}  // namespace playtest

#endif  // PLAYTEST_ENV_HPP_
