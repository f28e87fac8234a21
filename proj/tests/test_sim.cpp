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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "playtest/level.hpp"
#include "playtest/sim.hpp"
#include "test_util.hpp"

using namespace playtest;

namespace {

constexpr const char* kMinimal = "bounds -20 0 -20 20 10 20\nspawn 0 0.9 0 0\ngoal 5 1 5 1.0\n";

LevelSpec level_with(const std::string& extra) { return parse_level(std::string(kMinimal) + extra); }

// Independent slab test: entry distance of a ray into a box, if any.
std::optional<double> slab_oracle(const Vec3& o, const Vec3& d, const Aabb& b) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  const double os[3] = {o.x, o.y, o.z};
  const double ds[3] = {d.x, d.y, d.z};
  const double lo[3] = {b.min.x, b.min.y, b.min.z};
  const double hi[3] = {b.max.x, b.max.y, b.max.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(ds[a]) < 1e-300) {
      if (os[a] < lo[a] || os[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t1 = (lo[a] - os[a]) / ds[a];
    double t2 = (hi[a] - os[a]) / ds[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
  }
  if (tmin > tmax) return std::nullopt;
  return tmin;
}

double brute_raycast(const LevelSpec& level, const Vec3& o, const Vec3& d, double max_range) {
  double best = max_range;
  for (const auto& b : level.boxes) {
    if (b.has(kNoCollide) || !(b.has(kSolid) || b.has(kClimbable))) continue;
    if (auto t = slab_oracle(o, d, b.bounds)) best = std::min(best, *t);
  }
  for (const auto& p : level.platforms) {
    if (auto t = slab_oracle(o, d, platform_box(p, 0.0))) best = std::min(best, *t);
  }
  return best;
}

Action random_action(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {u(rng), u(rng), u(rng), u(rng)};
}

WorldState settled(const LevelSpec& level) {
  WorldState s = reset(level, 0);
  for (int i = 0; i < 3; ++i) step(level, s, {}, 1.0 / 30.0);
  return s;
}

}  // namespace

TEST_CASE("parse_level accepts the minimal file") {
  const LevelSpec l = parse_level(kMinimal);
  CHECK(l.goals.size() == 1);
  CHECK(l.boxes.empty());
  CHECK(l.bounds.min == Vec3{-20, 0, -20});
  CHECK(l.spawn.position == Vec3{0, 0.9, 0});
}

TEST_CASE("parse_level semantic and syntax errors") {
  auto fails_with = [](const std::string& text, const std::string& needle, int line) {
    try {
      parse_level(text);
      FAIL("expected LevelError for: " << text);
    } catch (const LevelError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
      CHECK(e.line() == line);
    }
  };
  fails_with("bounds -20 0 -20 20 10 20\nspawn 0 1 0 0\ngoal 99 1 5 1.0", "goal outside bounds", 3);
  fails_with("bounds -20 0 -20 20 10 20\nspawn 0 1 0 0\n", "no goals", 0);
  fails_with("spawn 0 1 0 0\ngoal 1 1 1 1\n", "missing bounds", 0);
  fails_with(std::string(kMinimal) + "box 1 0 1 0 1 2 solid\n", "inverted box", 4);
  fails_with(std::string(kMinimal) + "box 1 0 1 2 1 2 bouncy\n", "unknown box flag", 4);
  fails_with(std::string(kMinimal) + "box 1 0 1 2 1\n", "expects 7 fields", 4);
  fails_with(std::string(kMinimal) + "# fine\n\nwall 1 2 3\n", "unknown record", 6);
  fails_with("bounds -20 0 -20 20 10 20\nspawn 0 1 x 0\ngoal 1 1 1 1", "expected a number", 2);
  fails_with(std::string(kMinimal) + "platform 0 0 0 1 1 1 0 0 0 1 0 0 -1\n", "negative platform speed", 4);
  fails_with("bounds 1 0 0 0 1 1\n", "inverted bounds", 1);
}

TEST_CASE("level text round trip and hash") {
  for (const char* name : {"exploit", "stuck", "navigation", "dynamic"}) {
    const LevelSpec l = testing::canonical_level(name);
    const LevelSpec again = parse_level(to_text(l));
    CHECK(to_text(again) == to_text(l));
    CHECK(level_hash(again) == level_hash(l));
  }
  CHECK(level_hash(testing::canonical_level("exploit")) !=
        level_hash(testing::canonical_level("stuck")));
}

TEST_CASE("canonical levels carry their defects") {
  const LevelSpec exploit = testing::canonical_level("exploit");
  int nocollide = 0;
  for (const auto& b : exploit.boxes) nocollide += b.has(kNoCollide);
  CHECK(nocollide == 1);
  const LevelSpec stuck = testing::canonical_level("stuck");
  int traps = 0;
  for (const auto& b : stuck.boxes) traps += b.has(kTrap);
  CHECK(traps == 5);
  CHECK(testing::canonical_level("dynamic").platforms.size() >= 4);
  int climbable = 0;
  for (const auto& b : testing::canonical_level("navigation").boxes) climbable += b.has(kClimbable);
  CHECK(climbable >= 1);
}

TEST_CASE("nocollide box is invisible to rays") {
  const LevelSpec l = level_with("box 4 0 -2 5 3 2 nocollide\nbox 8 0 -2 9 3 2 solid\n");
  const Vec3 o{0, 1, 0};
  const Vec3 d{1, 0, 0};
  CHECK(std::abs(raycast(l, o, d, 15.0) - 8.0) < 1e-12);
  CHECK(std::abs(raycast(l, o, d, 15.0) - brute_raycast(l, o, d, 15.0)) < 1e-12);
}

TEST_CASE("raycast examples") {
  const LevelSpec empty = parse_level(kMinimal);
  CHECK(raycast(empty, {0, 1, 0}, {0, 0, 1}, 15.0) == 15.0);

  const LevelSpec wall = level_with("box -2 0 3 2 3 4 solid\n");
  CHECK(std::abs(raycast(wall, {0, 1, 0}, {0, 0, 1}, 15.0) - 3.0) < 1e-6);

  const LevelSpec behind = level_with("box -2 0 3 2 3 4 nocollide\nbox -2 0 7 2 3 8 solid\n");
  CHECK(std::abs(raycast(behind, {0, 1, 0}, {0, 0, 1}, 15.0) - 7.0) < 1e-6);
}

TEST_CASE("raycast agrees with a brute-force slab oracle on 10k rays") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::string extra;
  const char* flags[] = {"solid", "climbable", "nocollide", "trap", "solid,trap"};
  for (int i = 0; i < 25; ++i) {
    const double x = 18 * u(rng), z = 18 * u(rng), y = 4 + 4 * u(rng);
    const double sx = 0.2 + std::abs(2 * u(rng)), sz = 0.2 + std::abs(2 * u(rng));
    extra += "box " + std::to_string(x) + " " + std::to_string(y - 1) + " " + std::to_string(z) + " " +
             std::to_string(x + sx) + " " + std::to_string(y + 1) + " " + std::to_string(z + sz) + " " +
             flags[i % 5] + "\n";
  }
  extra += "platform -1 0 -1 1 0.5 1 -5 0 -5 5 0 5 2\n";
  const LevelSpec l = level_with(extra);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 o{18 * u(rng), 5 + 4.5 * u(rng), 18 * u(rng)};
    Vec3 d{u(rng), u(rng), u(rng)};
    if (norm(d) < 1e-6) continue;
    d = d * (1.0 / norm(d));
    const double got = raycast(l, o, d, 15.0);
    const double want = brute_raycast(l, o, d, 15.0);
    if (std::abs(got - want) > 1e-9) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("reset examples") {
  const LevelSpec l = testing::canonical_level("exploit");
  const WorldState s = reset(l, 0);
  CHECK(s.position == l.spawn.position);
  CHECK(s.velocity == Vec3{});
  CHECK(s.goal_index == 0);
  CHECK(s.episode_steps_remaining == 1000);
  CHECK(reset(l, 0) == reset(l, 0));
  WorldState a = reset(l, 1);
  WorldState b = reset(l, 2);
  CHECK(a.seed != b.seed);
  a.seed = b.seed = 0;
  CHECK(a == b);
}

TEST_CASE("equilibrium with zero control on flat floor") {
  const LevelSpec l = parse_level(kMinimal);
  WorldState s = settled(l);
  const Vec3 p = s.position;
  for (int i = 0; i < 30; ++i) step(l, s, {}, 1.0 / 30.0);
  CHECK(s.grounded);
  CHECK(s.velocity.x == 0.0);
  CHECK(s.velocity.z == 0.0);
  CHECK(std::abs(s.position.y - p.y) < 1e-4);
  CHECK(s.position.x == p.x);
  CHECK(s.position.z == p.z);
}

TEST_CASE("walking forward matches closed-form kinematics") {
  const LevelSpec l = parse_level(kMinimal);
  const PhysicsConfig cfg;
  for (int n : {1, 10, 30, 60}) {
    WorldState s = settled(l);
    const Vec3 p0 = s.position;
    const Vec3 fwd = facing(s.yaw);
    for (int i = 0; i < n; ++i) step(l, s, {1, 0, 0, 0}, cfg.dt, cfg);
    const Vec3 want = p0 + fwd * (cfg.walk_speed * n * cfg.dt);
    CHECK(std::abs(s.position.x - want.x) < 1e-6);
    CHECK(std::abs(s.position.z - want.z) < 1e-6);
  }
}

TEST_CASE("walking into a nocollide wall passes through and flags the crossing") {
  const LevelSpec l = level_with("box -3 0 2 3 3 2.5 nocollide\n");
  WorldState s = settled(l);
  bool crossed = false;
  for (int i = 0; i < 30; ++i) {
    const StepInfo info = step(l, s, {1, 0, 0, 0}, 1.0 / 30.0);
    if (info.defect_crossed) {
      crossed = true;
      CHECK(segment_intersects(info.position_before, info.position_after, l.boxes[0].bounds));
    }
  }
  CHECK(crossed);
  CHECK(s.position.z > 2.5);
}

TEST_CASE("solid wall blocks and slides") {
  const LevelSpec l = level_with("box -15 0 2 15 3 2.5 solid\n");
  WorldState s = settled(l);
  for (int i = 0; i < 60; ++i) step(l, s, {1, 0, 0.5, 0}, 1.0 / 30.0);
  CHECK(s.position.z + 0.45 <= 2.0 + 1e-4);
  CHECK(s.position.x > 1.0);  // strafe continues along the wall
}

TEST_CASE("step-up climbs low ledges only") {
  const LevelSpec low = level_with("box -3 0 2 3 0.5 6 solid\n");
  WorldState s = settled(low);
  for (int i = 0; i < 30; ++i) step(low, s, {1, 0, 0, 0}, 1.0 / 30.0);
  CHECK(s.position.z > 3.0);
  CHECK(std::abs(s.position.y - 1.4) < 1e-3);

  const LevelSpec high = level_with("box -3 0 2 3 1.0 6 solid\n");
  s = settled(high);
  for (int i = 0; i < 30; ++i) step(high, s, {1, 0, 0, 0}, 1.0 / 30.0);
  CHECK(s.position.z < 2.0);
}

TEST_CASE("jump reaches the configured apex and respects the cooldown") {
  const LevelSpec l = parse_level(kMinimal);
  const PhysicsConfig cfg;
  WorldState s = settled(l);
  const double y0 = s.position.y;
  step(l, s, {0, 0, 0, 1}, cfg.dt, cfg);
  CHECK(s.jump_cooldown_remaining > 0.0);
  double apex = y0;
  for (int i = 0; i < 60; ++i) {
    step(l, s, {0, 0, 0, 1}, cfg.dt, cfg);
    apex = std::max(apex, s.position.y);
    CHECK(s.jump_cooldown_remaining >= 0.0);
  }
  // Discrete integration lands within one tick of the continuous apex.
  CHECK(std::abs((apex - y0) - cfg.jump_apex) < cfg.jump_speed() * cfg.dt);

  // Below threshold: no jump.
  WorldState t = settled(l);
  step(l, t, {0, 0, 0, 0.5}, cfg.dt, cfg);
  CHECK(t.velocity.y <= 0.0);
}

TEST_CASE("climbing a climbable face rises at climb speed without gravity") {
  const LevelSpec l = level_with("box -3 0 0.5 3 5 1 climbable\n");
  const PhysicsConfig cfg;
  WorldState s = settled(l);
  step(l, s, {1, 0, 0, 0}, cfg.dt, cfg);
  step(l, s, {1, 0, 0, 0}, cfg.dt, cfg);
  CHECK(s.climbing);
  const double y = s.position.y;
  step(l, s, {1, 0, 0, 0}, cfg.dt, cfg);
  CHECK(std::abs(s.position.y - y - cfg.climb_speed * cfg.dt) < 1e-9);
  CHECK(s.velocity.y == cfg.climb_speed);
  double top = s.position.y;
  for (int i = 0; i < 120; ++i) {
    step(l, s, {1, 0, 0, 0}, cfg.dt, cfg);
    top = std::max(top, s.position.y);
  }
  CHECK(top - 0.9 >= 5.0 - 1e-3);  // feet reached the top
  CHECK(s.position.z > 1.0);       // and went over
}

TEST_CASE("trap latches and ignores controls") {
  const LevelSpec l = level_with("box -1 0 1 1 2 3 trap\n");
  WorldState s = settled(l);
  bool entered = false;
  for (int i = 0; i < 30 && !s.trapped; ++i) {
    entered |= step(l, s, {1, 0, 0, 0}, 1.0 / 30.0).trap_entered;
  }
  REQUIRE(s.trapped);
  CHECK(entered);
  const Vec3 p = s.position;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) step(l, s, random_action(rng), 1.0 / 30.0);
  CHECK(s.position == p);
  CHECK(s.trapped);
}

TEST_CASE("standing on a moving platform inherits its velocity") {
  const LevelSpec l = parse_level(
      "bounds -20 0 -20 20 10 20\nspawn 0 1.4 0 0\ngoal 5 1 5 1.0\n"
      "platform -1 0 -1 1 0.5 1 0 0 0 10 0 0 2\n");
  const PhysicsConfig cfg;
  WorldState s = reset(l, 0);
  for (int i = 0; i < 20; ++i) {
    step(l, s, {}, cfg.dt, cfg);
    if (i < 2) continue;
    const Vec3 pv = (platform_box(l.platforms[0], s.sim_time).min -
                     platform_box(l.platforms[0], s.sim_time - cfg.dt).min) * (1.0 / cfg.dt);
    CHECK(s.support_platform == 0);
    CHECK(std::abs(s.velocity.x - pv.x) < 1e-6);
    CHECK(std::abs(s.velocity.y - pv.y) < 1e-6);
    CHECK(std::abs(s.velocity.z - pv.z) < 1e-6);
  }

  // Vertical lift.
  const LevelSpec lift = parse_level(
      "bounds -20 0 -20 20 10 20\nspawn 0 1.4 0 0\ngoal 5 1 5 1.0\n"
      "platform -1 0 -1 1 0.5 1 0 0 0 0 4 0 1\n");
  s = reset(lift, 0);
  for (int i = 0; i < 40; ++i) {
    step(lift, s, {}, cfg.dt, cfg);
    if (i < 2) continue;
    CHECK(s.support_platform == 0);
    CHECK(std::abs(s.velocity.y - 1.0) < 1e-6);
    CHECK(std::abs(s.velocity.x) < 1e-6);
  }
}

TEST_CASE("determinism: identical state sequences") {
  for (const char* name : {"exploit", "dynamic", "navigation"}) {
    const LevelSpec l = testing::canonical_level(name);
    std::mt19937_64 r1(11), r2(11);
    WorldState a = reset(l, 5), b = reset(l, 5);
    for (int i = 0; i < 3000; ++i) {
      step(l, a, random_action(r1), 1.0 / 30.0);
      step(l, b, random_action(r2), 1.0 / 30.0);
      REQUIRE(a == b);
    }
  }
}

TEST_CASE("containment and no tunneling under random control") {
  const PhysicsConfig cfg;
  for (const char* name : {"exploit", "stuck", "navigation", "dynamic"}) {
    const LevelSpec l = testing::canonical_level(name);
    std::mt19937_64 rng(std::hash<std::string>{}(name));
    double worst_pen = 0.0;
    int tunnels = 0;
    int out_of_bounds = 0;
    int bad_quat = 0;
    int negative_cooldown = 0;
    for (int ep = 0; ep < 10; ++ep) {
      WorldState s = reset(l, ep);
      for (int i = 0; i < 1500; ++i) {
        Action a = random_action(rng);
        if (i % 200 < 100) a.forward = 1.0;  // max speed stretches
        const StepInfo info = step(l, s, a, cfg.dt, cfg);
        const Aabb me = agent_box(s, cfg);
        for (const auto& b : l.boxes) {
          if (!b.collides()) continue;
          worst_pen = std::max(worst_pen, penetration_depth(me, b.bounds));
          if (segment_intersects(info.position_before, info.position_after, b.bounds)) ++tunnels;
        }
        const Aabb inner = l.bounds.expanded({1e-4, 1e-4, 1e-4});
        if (!inner.contains(me.min) || !inner.contains(me.max)) ++out_of_bounds;
        const auto& q = s.orientation;
        if (std::abs(std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]) - 1.0) >= 1e-6) {
          ++bad_quat;
        }
        if (s.jump_cooldown_remaining < 0.0) ++negative_cooldown;
      }
    }
    INFO(name);
    CHECK(worst_pen <= cfg.contact_tolerance);
    CHECK(tunnels == 0);
    CHECK(out_of_bounds == 0);
    CHECK(bad_quat == 0);
    CHECK(negative_cooldown == 0);
  }
}

TEST_CASE("degenerate inputs never break the state") {
  const LevelSpec l = parse_level(kMinimal);
  WorldState s = settled(l);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  step(l, s, {5, -7, 3, 9}, 1.0 / 30.0);
  step(l, s, {1, 0, 0, 0}, -1.0);
  step(l, s, {1, 0, 0, 0}, nan);
  CHECK(std::isfinite(s.position.x));
  CHECK(std::isfinite(s.position.z));
  CHECK(l.bounds.contains(s.position));
  const Action c = Action{5, -7, 0.3, 9}.clamped();
  CHECK(c == Action{1, -1, 0.3, 1});
}
