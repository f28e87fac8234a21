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

#include "playtest/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace playtest {
namespace {

const Goal& active_goal(const LevelSpec& level, const WorldState& s) {
  const int n = static_cast<int>(level.goals.size());
  return level.goals[std::clamp(s.goal_index, 0, n - 1)];
}

double unit_clamp(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

double EnvConfig::distance_scale(const LevelSpec& level) const {
  return distance_normalizer > 0.0 ? distance_normalizer : level.diagonal();
}

double EnvConfig::shaping_scale() const {
  if (reward_scale > 0.0) return reward_scale;
  return 1.0 / (physics.walk_speed * physics.dt * action_repeat);
}

void EnvConfig::validate() const {
  if (action_repeat < 1) throw std::invalid_argument("action_repeat must be >= 1");
  if (episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  if (!(velocity_normalizer > 0.0)) {
    throw std::invalid_argument("velocity_normalizer must be > 0");
  }
  if (!(ray_range > 0.0)) throw std::invalid_argument("ray_range must be > 0");
  if (!(physics.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
}

std::array<Vec3, Observation::kNumRays> ray_rig(double yaw) {
  std::array<Vec3, Observation::kNumRays> rays;
  const double step = std::numbers::pi / 4.0;
  for (int k = 0; k < 8; ++k) rays[k] = facing(yaw + k * step);
  const Vec3 f = facing(yaw);
  const double c = std::sqrt(0.5);
  rays[8] = {f.x * c, c, f.z * c};
  rays[9] = {f.x * c, -c, f.z * c};
  rays[10] = {0.0, 1.0, 0.0};
  rays[11] = {0.0, -1.0, 0.0};
  return rays;
}

WorldState env_reset(const LevelSpec& level, const EnvConfig& cfg,
                     std::uint64_t seed) {
  return reset(level, seed, cfg.episode_length);
}

Observation observe(const LevelSpec& level, const WorldState& s,
                    const EnvConfig& cfg) {
  Observation obs;
  auto& o = obs.values;
  const double dmax = cfg.distance_scale(level);
  const Vec3 f = facing(s.yaw);
  const Vec3 r = right_of(s.yaw);
  const Vec3 to_goal = active_goal(level, s).position - s.position;

  o[Observation::kRelGoal + 0] = unit_clamp(dot(to_goal, r) / dmax);
  o[Observation::kRelGoal + 1] = unit_clamp(to_goal.y / dmax);
  o[Observation::kRelGoal + 2] = unit_clamp(dot(to_goal, f) / dmax);

  const double vmax = cfg.velocity_normalizer;
  o[Observation::kVelocity + 0] = unit_clamp(dot(s.velocity, r) / vmax);
  o[Observation::kVelocity + 1] = unit_clamp(s.velocity.y / vmax);
  o[Observation::kVelocity + 2] = unit_clamp(dot(s.velocity, f) / vmax);

  for (int i = 0; i < 4; ++i) {
    o[Observation::kOrientation + i] = unit_clamp(s.orientation[i]);
  }
  o[Observation::kGoalDistance] = std::min(norm(to_goal) / dmax, 1.0);
  o[Observation::kClimbing] = s.climbing ? 1.0 : 0.0;
  o[Observation::kGrounded] = s.grounded ? 1.0 : 0.0;
  o[Observation::kJumpCooldown] = std::clamp(
      s.jump_cooldown_remaining / cfg.physics.jump_cooldown, 0.0, 1.0);
  o[Observation::kResetTimer] = std::clamp(
      static_cast<double>(s.episode_steps_remaining) / cfg.episode_length, 0.0,
      1.0);

  const auto rays = ray_rig(s.yaw);
  for (int k = 0; k < Observation::kNumRays; ++k) {
    const double hit =
        raycast(level, s.position, rays[k], cfg.ray_range, s.sim_time);
    o[Observation::kRays + k] = std::clamp(hit / cfg.ray_range, 0.0, 1.0);
  }
  return obs;
}

double reward(const LevelSpec& level, const WorldState& prev,
              const WorldState& next, const StepInfo& info,
              const EnvConfig& cfg) {
  const Vec3 goal = active_goal(level, prev).position;
  const double d_prev = distance(prev.position, goal);
  const double d_next = distance(next.position, goal);
  double r = cfg.shaping_scale() * (d_prev - d_next);
  if (info.goal_reached) r += cfg.goal_bonus;
  return r;
}

EnvStep env_step(const LevelSpec& level, WorldState& s, const Action& action,
                 const EnvConfig& cfg) {
  EnvStep out;
  const double c = cfg.shaping_scale();
  const int num_goals = static_cast<int>(level.goals.size());
  for (int k = 0; k < cfg.action_repeat; ++k) {
    const Vec3 goal = active_goal(level, s).position;
    const double d_prev = distance(s.position, goal);
    const StepInfo info = step(level, s, action, cfg.physics.dt, cfg.physics);
    const double d_next = distance(s.position, goal);
    out.reward += c * (d_prev - d_next);
    out.physics_steps += 1;
    out.trap_entered |= info.trap_entered;
    out.defect_crossed |= info.defect_crossed;
    if (info.goal_reached) {
      out.reward += cfg.goal_bonus;
      out.goal_reached = true;
      s.goal_index += 1;
      if (s.goal_index >= num_goals) {
        out.done = true;
        out.reason = Termination::kAllGoals;
        break;
      }
    }
  }
  s.decision_step += 1;
  s.episode_steps_remaining = std::max(0, s.episode_steps_remaining - 1);
  if (!out.done &&
      (s.episode_steps_remaining == 0 || s.decision_step >= cfg.episode_length)) {
    out.done = true;
    out.reason = Termination::kTimeout;
  }
  out.observation = observe(level, s, cfg);
  return out;
}

}  // namespace playtest
