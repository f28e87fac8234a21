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

#include "playtest/sim.hpp"

#include <algorithm>
#include <cmath>

namespace playtest {
namespace {

// Lateral overlap tests ignore faces that merely touch.
constexpr double kTouchEps = 1e-9;

struct Obstacle {
  Aabb box;
  int platform = -1;
};

double clamp1(double v) {
  if (!std::isfinite(v)) return 0.0;
  return std::clamp(v, -1.0, 1.0);
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

// Largest signed move along `axis`, no further than `delta`, that keeps
// `agent` out of every obstacle ahead of it and inside `bounds`. Obstacles the
// agent already penetrates are ignored so it can always walk out of them.
double sweep_axis(const Aabb& agent, int axis, double delta,
                  const std::vector<Obstacle>& obstacles, const Aabb& bounds,
                  double skin, int* hit_platform = nullptr) {
  const int a1 = (axis + 1) % 3;
  const int a2 = (axis + 2) % 3;
  if (hit_platform) *hit_platform = -1;
  for (const auto& o : obstacles) {
    if (!overlaps_on_axis(agent, o.box, a1, kTouchEps) ||
        !overlaps_on_axis(agent, o.box, a2, kTouchEps)) {
      continue;
    }
    if (delta > 0.0 && o.box.min[axis] >= agent.max[axis] - skin) {
      const double limit = o.box.min[axis] - agent.max[axis];
      if (limit < delta) {
        delta = limit;
        if (hit_platform) *hit_platform = o.platform;
      }
    } else if (delta < 0.0 && o.box.max[axis] <= agent.min[axis] + skin) {
      const double limit = o.box.max[axis] - agent.min[axis];
      if (limit > delta) {
        delta = limit;
        if (hit_platform) *hit_platform = o.platform;
      }
    }
  }
  // Bound walls.
  if (delta > 0.0) {
    delta = std::min(delta, bounds.max[axis] - agent.max[axis]);
  } else if (delta < 0.0) {
    delta = std::max(delta, bounds.min[axis] - agent.min[axis]);
  }
  return delta;
}

Aabb moved(const Aabb& box, int axis, double d) {
  Vec3 v;
  v[axis] = d;
  return box.translated(v);
}

}  // namespace

double PhysicsConfig::jump_speed() const {
  return std::sqrt(2.0 * std::abs(gravity) * jump_apex);
}

Action Action::clamped() const {
  return {clamp1(forward), clamp1(turn), clamp1(strafe), clamp1(jump)};
}

std::array<double, 4> yaw_quaternion(double yaw) {
  return {std::cos(0.5 * yaw), 0.0, std::sin(0.5 * yaw), 0.0};
}

Vec3 facing(double yaw) { return {std::sin(yaw), 0.0, std::cos(yaw)}; }

Vec3 right_of(double yaw) { return {std::cos(yaw), 0.0, -std::sin(yaw)}; }

Aabb agent_box(const WorldState& state, const PhysicsConfig& cfg) {
  return Aabb::centered(state.position, cfg.half_extent);
}

Aabb platform_box(const Platform& p, double t, double* phase) {
  const double length = p.path_length();
  double u = 0.0;
  if (length > 0.0 && p.speed > 0.0) {
    const double s = std::fmod(p.speed * t, 2.0 * length);
    u = s <= length ? s / length : 2.0 - s / length;
  }
  if (phase) *phase = u;
  const Vec3 origin = p.waypoint_a + (p.waypoint_b - p.waypoint_a) * u;
  return p.shape.translated(origin);
}

WorldState reset(const LevelSpec& level, std::uint64_t seed,
                 int episode_length) {
  WorldState s;
  s.position = level.spawn.position;
  s.yaw = wrap_angle(level.spawn.yaw);
  s.orientation = yaw_quaternion(s.yaw);
  s.platform_phase.assign(level.platforms.size(), 0.0);
  s.episode_steps_remaining = episode_length;
  s.seed = seed;
  return s;
}

double raycast(const LevelSpec& level, const Vec3& origin, const Vec3& direction,
               double max_range, double sim_time) {
  double best = max_range;
  for (const auto& b : level.boxes) {
    if (!b.collides()) continue;
    if (auto t = ray_aabb(origin, direction, b.bounds, 0.0, best)) {
      best = std::min(best, *t);
    }
  }
  for (const auto& p : level.platforms) {
    if (auto t = ray_aabb(origin, direction, platform_box(p, sim_time), 0.0,
                          best)) {
      best = std::min(best, *t);
    }
  }
  return best;
}

StepInfo step(const LevelSpec& level, WorldState& s, const Action& control,
              double dt, const PhysicsConfig& cfg) {
  StepInfo info;
  info.position_before = s.position;
  if (!(dt > 0.0) || !std::isfinite(dt)) dt = cfg.dt;
  const Action in = control.clamped();
  const double skin = cfg.contact_tolerance;

  // Platforms advance first; the agent then moves against their new boxes.
  const double t0 = s.sim_time;
  const double t1 = t0 + dt;
  std::vector<Obstacle> obstacles;
  obstacles.reserve(level.boxes.size() + level.platforms.size());
  for (const auto& b : level.boxes) {
    if (b.collides()) obstacles.push_back({b.bounds, -1});
  }
  std::vector<Vec3> platform_velocity(level.platforms.size());
  s.platform_phase.resize(level.platforms.size());
  for (std::size_t i = 0; i < level.platforms.size(); ++i) {
    const auto& p = level.platforms[i];
    const Aabb before = platform_box(p, t0);
    const Aabb after = platform_box(p, t1, &s.platform_phase[i]);
    platform_velocity[i] = (after.min - before.min) * (1.0 / dt);
    obstacles.push_back({after, static_cast<int>(i)});
  }
  s.sim_time = t1;
  s.jump_cooldown_remaining = std::max(0.0, s.jump_cooldown_remaining - dt);

  if (s.trapped) {
    s.velocity = {};
    s.climbing = false;
    info.position_after = s.position;
    return info;
  }

  // A platform moving into the agent shoves it out along the shallowest axis.
  bool lifted_by_support = false;
  for (std::size_t i = 0; i < level.platforms.size(); ++i) {
    const Aabb& pb = obstacles[obstacles.size() - level.platforms.size() + i].box;
    const Aabb me = agent_box(s, cfg);
    if (penetration_depth(me, pb) <= skin) continue;
    int best_axis = 0;
    double best_push = 0.0;
    double best_mag = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
      const double up = pb.max[axis] - me.min[axis];
      const double down = pb.min[axis] - me.max[axis];
      const double push = up < -down ? up : down;
      if (std::abs(push) < best_mag) {
        best_mag = std::abs(push);
        best_axis = axis;
        best_push = push;
      }
    }
    std::vector<Obstacle> others;
    for (const auto& o : obstacles) {
      if (o.platform != static_cast<int>(i)) others.push_back(o);
    }
    s.position[best_axis] +=
        sweep_axis(me, best_axis, best_push, others, level.bounds, skin);
    if (best_axis == 1 && static_cast<int>(i) == s.support_platform) {
      lifted_by_support = true;
    }
  }

  s.yaw = wrap_angle(s.yaw + in.turn * cfg.turn_rate * dt);
  s.orientation = yaw_quaternion(s.yaw);
  const Vec3 fwd = facing(s.yaw);
  const Vec3 right = right_of(s.yaw);

  Vec3 base;
  const bool on_platform = s.grounded && s.support_platform >= 0 &&
                           s.support_platform <
                               static_cast<int>(level.platforms.size());
  if (on_platform) base = platform_velocity[s.support_platform];

  // Climbing: pressing forward into a climbable box face within reach.
  bool climbing = false;
  if (in.forward > 0.0) {
    const Aabb reach = agent_box(s, cfg).expanded(
        {cfg.climb_reach, 0.0, cfg.climb_reach});
    const Aabb me = agent_box(s, cfg);
    for (const auto& b : level.boxes) {
      if (!b.collides() || !b.has(kClimbable)) continue;
      if (!overlaps(reach, b.bounds, kTouchEps)) continue;
      if (overlaps_on_axis(me, b.bounds, 1, kTouchEps) &&
          me.min.y >= b.bounds.max.y - skin) {
        continue;
      }
      // Closest point on the box footprint relative to the agent.
      const Vec3 c{std::clamp(s.position.x, b.bounds.min.x, b.bounds.max.x), 0.0,
                   std::clamp(s.position.z, b.bounds.min.z, b.bounds.max.z)};
      const Vec3 to_box{c.x - s.position.x, 0.0, c.z - s.position.z};
      if (dot(to_box, fwd) > 0.0) {
        climbing = true;
        break;
      }
    }
  }
  s.climbing = climbing;

  Vec3 v = fwd * (in.forward * cfg.walk_speed) +
           right * (in.strafe * cfg.strafe_speed);
  v.x += base.x;
  v.z += base.z;
  const bool can_jump = s.grounded && s.jump_cooldown_remaining == 0.0 &&
                        in.jump > 0.5;
  if (climbing) {
    v.y = cfg.climb_speed;
  } else if (can_jump) {
    v.y = base.y + cfg.jump_speed();
    s.jump_cooldown_remaining = cfg.jump_cooldown;
  } else if (s.grounded) {
    // A rising support already carried the agent up through the shove.
    v.y = (lifted_by_support ? 0.0 : base.y) + cfg.gravity * dt;
  } else {
    v.y = s.velocity.y + cfg.gravity * dt;
  }
  v.y = std::max(v.y, -cfg.max_fall_speed);

  const bool was_grounded = s.grounded;

  // Vertical first so platform lifts resolve before lateral sweeps.
  {
    const Aabb me = agent_box(s, cfg);
    const double want = v.y * dt;
    const double got = sweep_axis(me, 1, want, obstacles, level.bounds, skin);
    s.position.y += got;
    if (got != want) v.y = 0.0;
  }
  for (int axis : {0, 2}) {
    const Aabb me = agent_box(s, cfg);
    const double want = v[axis] * dt;
    if (want == 0.0) continue;
    double got = sweep_axis(me, axis, want, obstacles, level.bounds, skin);
    if (std::abs(got) + 1e-12 < std::abs(want) && was_grounded && !climbing) {
      // Step up: rise, advance, settle back down onto whatever is below.
      const double rise =
          sweep_axis(me, 1, cfg.step_height, obstacles, level.bounds, skin);
      const Aabb raised = moved(me, 1, rise);
      const double advance =
          sweep_axis(raised, axis, want, obstacles, level.bounds, skin);
      const Aabb forward = moved(raised, axis, advance);
      const double drop =
          sweep_axis(forward, 1, -rise, obstacles, level.bounds, skin);
      if (std::abs(advance) > std::abs(got) + 1e-9 && rise + drop > 1e-9) {
        s.position.y += rise + drop;
        got = advance;
      }
    }
    s.position[axis] += got;
    if (got != want) v[axis] = got / dt;
  }

  // Ground probe: a support surface touching the feet.
  s.grounded = false;
  s.support_platform = -1;
  {
    const Aabb me = agent_box(s, cfg);
    double support_top = -std::numeric_limits<double>::infinity();
    Vec3 support_v;
    if (std::abs(me.min.y - level.bounds.min.y) <= skin) {
      s.grounded = true;
      support_top = level.bounds.min.y;
    }
    for (const auto& o : obstacles) {
      if (!overlaps_on_axis(me, o.box, 0, kTouchEps) ||
          !overlaps_on_axis(me, o.box, 2, kTouchEps)) {
        continue;
      }
      if (std::abs(me.min.y - o.box.max.y) > skin) continue;
      if (o.box.max.y > support_top ||
          (o.box.max.y == support_top && o.platform >= 0)) {
        support_top = o.box.max.y;
        s.grounded = true;
        s.support_platform = o.platform;
        support_v = o.platform >= 0 ? platform_velocity[o.platform] : Vec3{};
      }
    }
    if (s.grounded && v.y > support_v.y + 1e-9) {
      // Moving away from the surface this tick (jump take-off, climb).
      s.grounded = false;
      s.support_platform = -1;
    } else if (s.grounded) {
      v.y = support_v.y;
    }
  }
  if (climbing) s.grounded = false;
  s.velocity = v;

  info.position_after = s.position;

  for (const auto& b : level.boxes) {
    if (b.has(kNoCollide) &&
        segment_intersects(info.position_before, info.position_after,
                           b.bounds)) {
      info.defect_crossed = true;
    }
    if (b.has(kTrap) && b.bounds.contains(s.position)) {
      s.trapped = true;
      info.trap_entered = true;
    }
  }
  if (s.trapped) {
    s.velocity = {};
    s.climbing = false;
  }
  if (s.goal_index >= 0 &&
      s.goal_index < static_cast<int>(level.goals.size())) {
    const Goal& g = level.goals[s.goal_index];
    info.goal_reached = distance(s.position, g.position) <= g.radius;
  }
  return info;
}

}  // namespace playtest
