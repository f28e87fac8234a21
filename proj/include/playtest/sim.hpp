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

#ifndef PLAYTEST_SIM_HPP_
#define PLAYTEST_SIM_HPP_

#include <array>
#include <cstdint>
#include <numbers>
#include <vector>

#include "playtest/geometry.hpp"
#include "playtest/level.hpp"

namespace playtest {

/// Character-controller tuning. All simulation constants live here.
struct PhysicsConfig {
  double dt = 1.0 / 30.0;
  Vec3 half_extent{0.45, 0.9, 0.45};
  double walk_speed = 6.0;
  double strafe_speed = 4.0;
  double turn_rate = std::numbers::pi;  // rad/s at full deflection
  double jump_apex = 1.5;
  double gravity = -20.0;
  double climb_speed = 3.0;
  double climb_reach = 0.15;
  double jump_cooldown = 0.5;
  double step_height = 0.55;
  double max_fall_speed = 25.0;
  double contact_tolerance = 1e-4;

  double jump_speed() const;
};

/// Controller input. Components are clamped to [-1, 1] on entry to step().
struct Action {
  double forward = 0.0;
  double turn = 0.0;
  double strafe = 0.0;
  double jump = 0.0;

  static constexpr int kSize = 4;

  Action clamped() const;
  friend bool operator==(const Action&, const Action&) = default;
};

struct WorldState {
  Vec3 position;
  Vec3 velocity;
  double yaw = 0.0;
  // (w, x, y, z); rotation about +y only.
  std::array<double, 4> orientation{1.0, 0.0, 0.0, 0.0};
  bool grounded = false;
  bool climbing = false;
  // Latched once the agent enters a trap volume.
  bool trapped = false;
  double jump_cooldown_remaining = 0.0;
  double sim_time = 0.0;
  std::vector<double> platform_phase;
  // Platform the agent is standing on, or -1.
  int support_platform = -1;
  int goal_index = 0;
  int decision_step = 0;
  int episode_steps_remaining = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct StepInfo {
  bool goal_reached = false;
  bool trap_entered = false;
  bool defect_crossed = false;
  Vec3 position_before;
  Vec3 position_after;
};

WorldState reset(const LevelSpec& level, std::uint64_t seed,
                 int episode_length = 1000);

/// Advance one fixed tick. Does not advance goal_index; callers decide what a
/// reached goal means.
StepInfo step(const LevelSpec& level, WorldState& state, const Action& control,
              double dt, const PhysicsConfig& cfg = {});

/// Distance to the first collidable box or platform hit, or max_range.
/// Missing-collision boxes are never hit. Platforms are placed at `sim_time`.
double raycast(const LevelSpec& level, const Vec3& origin, const Vec3& direction,
               double max_range, double sim_time = 0.0);

/// World box of platform `p` at time `t`; `phase` receives the 0..1 position
/// along the waypoint segment when non-null.
Aabb platform_box(const Platform& p, double t, double* phase = nullptr);

Aabb agent_box(const WorldState& state, const PhysicsConfig& cfg = {});

std::array<double, 4> yaw_quaternion(double yaw);

/// Unit facing vector on the ground plane for `yaw` (yaw 0 faces +z).
Vec3 facing(double yaw);
/// Unit vector to the agent's right for `yaw`.
Vec3 right_of(double yaw);

}  // namespace playtest

#endif  // PLAYTEST_SIM_HPP_
