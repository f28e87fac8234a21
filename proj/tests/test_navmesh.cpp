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
#include <numbers>
#include <queue>
#include <random>

#include "playtest/analytics.hpp"
#include "playtest/navmesh.hpp"
#include "playtest/rollout.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace playtest;
using playtest::testing::dijkstra;
using playtest::testing::ExactCost;
using playtest::testing::compare;
using playtest::testing::mask_adjacent;

namespace {

constexpr const char* kFlat = "bounds -10 0 -10 10 6 10\nspawn 0 0.9 -7 0\ngoal 0 1 6 1.0\n";

// Clearance oracle: floor is the highest authored box top covering the whole
// cell; the agent box standing on it, above step height, must overlap no
// authored box.
bool cell_clear(const LevelSpec& l, double cx, double cz, double* floor_out) {
  const Vec3 he{0.45, 0.9, 0.45};
  const double h = 0.25;  // half cell
  double floor = l.bounds.min.y;
  for (const auto& b : l.boxes) {
    if (!(b.collides() || b.has(kNoCollide))) continue;
    if (b.bounds.min.x <= cx - h && b.bounds.max.x >= cx + h && b.bounds.min.z <= cz - h &&
        b.bounds.max.z >= cz + h) {
      floor = std::max(floor, b.bounds.max.y);
    }
  }
  *floor_out = floor;
  const Vec3 lo{cx - he.x, floor + 0.55, cz - he.z};
  const Vec3 hi{cx + he.x, floor + 1e-6 + 2 * he.y, cz + he.z};
  if (hi.y > l.bounds.max.y) return false;
  for (const auto& b : l.boxes) {
    if (!(b.collides() || b.has(kNoCollide))) continue;
    const bool sep = hi.x <= b.bounds.min.x + 1e-9 || b.bounds.max.x <= lo.x + 1e-9 ||
                     hi.y <= b.bounds.min.y + 1e-9 || b.bounds.max.y <= lo.y + 1e-9 ||
                     hi.z <= b.bounds.min.z + 1e-9 || b.bounds.max.z <= lo.z + 1e-9;
    if (!sep) return false;
  }
  return true;
}

void check_against_oracle(const LevelSpec& l) {
  const NavGrid g = bake(l);
  int mismatches = 0;
  for (int z = 0; z < g.nz(); ++z) {
    for (int x = 0; x < g.nx(); ++x) {
      const double cx = g.origin().x + (x + 0.5) * g.cell_size();
      const double cz = g.origin().z + (z + 0.5) * g.cell_size();
      double floor = 0.0;
      const bool want = cell_clear(l, cx, cz, &floor);
      if (want != g.walkable({x, z})) ++mismatches;
      if (want && std::abs(g.floor_height({x, z}) - floor) > 1e-12) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

}  // namespace

TEST_CASE("empty floor: every in-bounds cell walkable") {
  const LevelSpec l = parse_level(kFlat);
  const NavGrid g = bake(l);
  CHECK(g.nx() == 40);
  CHECK(g.nz() == 40);
  CHECK(g.cell_size() == 0.5);
  CHECK(g.walkable_count() == 1600u);
}

TEST_CASE("defect wall blocks the navmesh and A* routes around it") {
  const LevelSpec l = testing::canonical_level("exploit");
  const NavGrid g = bake(l);
  const Box* defect = nullptr;
  for (const auto& b : l.boxes) {
    if (b.has(kNoCollide)) defect = &b;
  }
  REQUIRE(defect != nullptr);
  for (double x = defect->bounds.min.x + 0.1; x < defect->bounds.max.x; x += 0.25) {
    CHECK_FALSE(g.walkable(g.cell_of({x, 0, 0})));
  }
  const auto path = shortest_path(g, l.spawn.position, l.goals[0].position);
  REQUIRE(path.has_value());
  bool through_opening = false;
  for (std::size_t i = 0; i + 1 < path->waypoints.size(); ++i) {
    CHECK_FALSE(segment_intersects(path->waypoints[i], path->waypoints[i + 1], defect->bounds));
    if (std::abs(path->waypoints[i].z) < 0.5 && path->waypoints[i].x > 6.0) through_opening = true;
  }
  CHECK(through_opening);
  check_against_oracle(l);
}

TEST_CASE("a 0.1 gap narrower than the agent is not walkable") {
  const LevelSpec l = parse_level(std::string(kFlat) +
                                  "box -10 0 -0.25 0.05 3 0.25 solid\n"
                                  "box 0.15 0 -0.25 10 3 0.25 solid\n");
  const NavGrid g = bake(l);
  for (double z = -0.2; z <= 0.2; z += 0.1) {
    CHECK_FALSE(g.walkable(g.cell_of({0.1, 0, z})));
  }
  CHECK_FALSE(shortest_path(g, l.spawn.position, l.goals[0].position).has_value());
  check_against_oracle(l);
}

TEST_CASE("baked canonical levels agree with the clearance oracle") {
  for (const char* name : {"exploit", "stuck", "navigation", "dynamic"}) {
    INFO(name);
    check_against_oracle(testing::canonical_level(name));
  }
}

TEST_CASE("raised floors and step limits") {
  const LevelSpec l = parse_level(std::string(kFlat) +
                                  "box -2 0 -2 2 0.5 2 solid\n"
                                  "box 4 0 -2 8 1.2 2 solid\n");
  const NavGrid g = bake(l);
  const CellIndex low_top = g.cell_of({0, 0, 0});
  const CellIndex high_top = g.cell_of({6, 0, 0});
  CHECK(g.walkable(low_top));
  CHECK(g.floor_height(low_top) == 0.5);
  CHECK(g.walkable(high_top));
  CHECK(g.floor_height(high_top) == 1.2);
  // 0.5 steps up from the floor, 1.2 does not.
  const CellIndex low_edge = g.cell_of({-1.9, 0, 0});
  CHECK(g.adjacent(low_edge, {low_edge.x - 1, low_edge.z}));
  const CellIndex high_edge = g.cell_of({4.1, 0, 0});
  CHECK_FALSE(g.adjacent(high_edge, {high_edge.x - 1, high_edge.z}));
  CHECK_FALSE(shortest_path(g, l.spawn.position, Vec3{6, 2.1, 0}).has_value());
}

TEST_CASE("shortest_path examples") {
  const NavGrid open = NavGrid::from_mask(10, 10, std::vector<std::uint8_t>(100, 1));
  const auto same = shortest_path(open, CellIndex{3, 4}, CellIndex{3, 4});
  REQUIRE(same.has_value());
  CHECK(same->waypoints.size() == 1);
  CHECK(same->length == 0.0);

  const auto diag = shortest_path(open, CellIndex{0, 0}, CellIndex{9, 9});
  REQUIRE(diag.has_value());
  CHECK(std::abs(diag->length - 9.0 * std::numbers::sqrt2) < 1e-12);
  CHECK(diag->diagonal_moves == 9);
  CHECK(diag->orthogonal_moves == 0);

  // Goal inside a closed ring of walls.
  std::vector<std::uint8_t> mask(100, 1);
  for (int i = 3; i <= 7; ++i) {
    mask[3 * 10 + i] = mask[7 * 10 + i] = mask[i * 10 + 3] = mask[i * 10 + 7] = 0;
  }
  const NavGrid ring = NavGrid::from_mask(10, 10, mask);
  CHECK_FALSE(shortest_path(ring, CellIndex{0, 0}, CellIndex{5, 5}).has_value());
  CHECK(shortest_path(ring, CellIndex{4, 4}, CellIndex{6, 6}).has_value());
}

TEST_CASE("no corner cutting on diagonals") {
  std::vector<std::uint8_t> mask(9, 1);
  mask[1] = 0;  // (1, 0) blocked
  const NavGrid g = NavGrid::from_mask(3, 3, mask);
  CHECK_FALSE(g.adjacent({0, 0}, {1, 1}));
  CHECK(g.adjacent({0, 1}, {1, 1}));
}

TEST_CASE("A* matches an exact Dijkstra oracle and returns valid paths") {
  std::mt19937_64 rng(123);
  constexpr int n = 32;
  int compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::bernoulli_distribution wall(0.15 + 0.01 * (trial % 20));
    std::vector<std::uint8_t> mask(n * n);
    for (auto& c : mask) c = wall(rng) ? 0 : 1;
    std::uniform_int_distribution<int> pick(0, n - 1);
    const int sx = pick(rng), sz = pick(rng), tx = pick(rng), tz = pick(rng);
    mask[sz * n + sx] = mask[tz * n + tx] = 1;
    const NavGrid g = NavGrid::from_mask(n, n, mask);
    const auto astar = shortest_path(g, CellIndex{sx, sz}, CellIndex{tx, tz});
    const auto oracle = dijkstra(mask, n, sx, sz, tx, tz);
    REQUIRE(astar.has_value() == oracle.has_value());
    if (!astar) continue;
    ++compared;
    CHECK(astar->orthogonal_moves == oracle->a);
    CHECK(astar->diagonal_moves == oracle->b);
    CHECK(astar->length == move_cost(oracle->a, oracle->b, 1.0));
    // Path validity.
    REQUIRE(!astar->cells.empty());
    CHECK(astar->cells.front() == CellIndex{sx, sz});
    CHECK(astar->cells.back() == CellIndex{tx, tz});
    double seg = 0.0;
    for (std::size_t i = 0; i + 1 < astar->cells.size(); ++i) {
      const auto a = astar->cells[i], b = astar->cells[i + 1];
      CHECK(g.adjacent(a, b));
      CHECK(mask_adjacent(mask, n, a.x, a.z, b.x, b.z));
      seg += distance(astar->waypoints[i], astar->waypoints[i + 1]);
    }
    CHECK(std::abs(seg - astar->length) < 1e-9);
  }
  CHECK(compared > 20);
}

TEST_CASE("adjacency is symmetric on baked grids") {
  for (const char* name : {"navigation", "dynamic"}) {
    const NavGrid g = bake(testing::canonical_level(name));
    int asym = 0;
    for (int z = 0; z < g.nz(); ++z) {
      for (int x = 0; x < g.nx(); ++x) {
        for (int dz = -1; dz <= 1; ++dz) {
          for (int dx = -1; dx <= 1; ++dx) {
            const CellIndex a{x, z}, b{x + dx, z + dz};
            if (g.adjacent(a, b) != g.adjacent(b, a)) ++asym;
          }
        }
      }
    }
    CHECK(asym == 0);
  }
}

TEST_CASE("bake rejects bad cell sizes and a blocked spawn") {
  const LevelSpec l = parse_level(kFlat);
  NavBakeConfig cfg;
  cfg.cell_size = 0.0;
  CHECK_THROWS_AS(bake(l, cfg), NavError);
  cfg.cell_size = 1.0;  // wider than the agent
  CHECK_THROWS_AS(bake(l, cfg), NavError);
  const LevelSpec blocked = parse_level(std::string(kFlat) + "box -1 0 -8 1 5 -6 solid\n");
  CHECK_THROWS_WITH_AS(bake(blocked), doctest::Contains("no walkable cell under spawn"), NavError);
}

TEST_CASE("scripted policy: waypoint ahead and behind") {
  const LevelSpec l = parse_level(kFlat);
  const EnvConfig cfg;
  WorldState s = env_reset(l, cfg);
  s.position = {0, 0.9, 0};
  s.yaw = 0.0;
  NavPath ahead;
  ahead.waypoints = {{0, 0.9, 5}};
  std::size_t cursor = 0;
  Action a = scripted_policy(ahead, cursor, s, cfg);
  CHECK(a.forward == 1.0);
  CHECK(std::abs(a.turn) < 1e-12);
  CHECK(a.jump == 0.0);

  NavPath behind;
  behind.waypoints = {{0, 0.9, -5}};
  cursor = 0;
  a = scripted_policy(behind, cursor, s, cfg);
  CHECK(std::abs(a.turn) == 1.0);
  CHECK(a.forward == 0.0);
  CHECK(a.jump == 0.0);

  // Waypoints within the pop radius are skipped.
  NavPath two;
  two.waypoints = {{0.1, 0.9, 0.1}, {0, 0.9, 5}};
  cursor = 0;
  a = scripted_policy(two, cursor, s, cfg);
  CHECK(cursor == 1);
  CHECK(a.forward == 1.0);
}

TEST_CASE("scripted agent completes the exploit level without crossing the defect") {
  const LevelSpec l = testing::canonical_level("exploit");
  const EnvConfig cfg;
  const NavGrid g = bake(l);
  std::vector<Trajectory> trajs;
  for (int ep = 0; ep < 3; ++ep) {
    ScriptedAgent agent(l, g, cfg);
    int crossings = 0;
    const Trajectory t = run_episode(
        l, cfg, [&](const WorldState& s, const Observation&) { return agent.act(s); }, ep);
    for (const auto& step : t.steps) {
      crossings += (step.events & kEventDefect) != 0;
      CHECK(step.action[3] == 0.0f);  // never jumps
    }
    CHECK(crossings == 0);
    REQUIRE(!t.steps.empty());
    CHECK((t.steps.back().events & kEventAllGoals) != 0);
    trajs.push_back(t);
  }
  CHECK(trajs[0] == trajs[1]);
  CHECK(exploit_report(std::span<const Trajectory>(trajs), l).total_crossings() == 0);
}

TEST_CASE("navmesh PGM export") {
  const LevelSpec l = parse_level(std::string(kFlat) + "box -10 0 9 10 5 10 solid\n");
  const NavGrid g = bake(l);
  const std::string pgm = to_pgm(g);
  const std::string header = "P5\n40 40\n255\n";
  REQUIRE(pgm.substr(0, header.size()) == header);
  REQUIRE(pgm.size() == header.size() + 1600);
  // Row 0 is the max-z edge, blocked by the wall; the last row is open.
  CHECK(static_cast<unsigned char>(pgm[header.size()]) == 0);
  CHECK(static_cast<unsigned char>(pgm[pgm.size() - 1]) == 255);
  for (std::size_t i = header.size(); i < pgm.size(); ++i) {
    const auto v = static_cast<unsigned char>(pgm[i]);
    CHECK((v == 0 || v == 255));
  }
}
