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

#include "playtest/navmesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace playtest {
namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr int kSnapRadius = 3;

// Neighbour offsets: orthogonal first, then diagonal.
constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDz[8] = {0, 0, 1, -1, 1, -1, 1, -1};

}  // namespace

NavGrid::NavGrid(Vec3 origin, double cell_size, int nx, int nz,
                 double step_height)
    : origin_(origin),
      cell_size_(cell_size),
      nx_(nx),
      nz_(nz),
      step_height_(step_height),
      walkable_(static_cast<std::size_t>(nx) * nz, 0),
      floor_(static_cast<std::size_t>(nx) * nz, origin.y) {}

NavGrid NavGrid::from_mask(int nx, int nz, const std::vector<std::uint8_t>& mask,
                           double cell_size) {
  if (mask.size() != static_cast<std::size_t>(nx) * nz) {
    throw NavError("mask size does not match grid dimensions");
  }
  NavGrid g({0.0, 0.0, 0.0}, cell_size, nx, nz, 0.55);
  for (std::size_t i = 0; i < mask.size(); ++i) g.walkable_[i] = mask[i] ? 1 : 0;
  return g;
}

void NavGrid::set(CellIndex c, bool walkable, double floor_height) {
  walkable_[flat(c)] = walkable ? 1 : 0;
  floor_[flat(c)] = floor_height;
}

std::size_t NavGrid::walkable_count() const {
  return static_cast<std::size_t>(
      std::count(walkable_.begin(), walkable_.end(), std::uint8_t{1}));
}

CellIndex NavGrid::cell_of(const Vec3& p) const {
  return {static_cast<int>(std::floor((p.x - origin_.x) / cell_size_)),
          static_cast<int>(std::floor((p.z - origin_.z) / cell_size_))};
}

Vec3 NavGrid::cell_center(CellIndex c) const {
  return {origin_.x + (c.x + 0.5) * cell_size_, floor_[flat(c)],
          origin_.z + (c.z + 0.5) * cell_size_};
}

bool NavGrid::adjacent(CellIndex a, CellIndex b) const {
  const int dx = b.x - a.x;
  const int dz = b.z - a.z;
  if (std::abs(dx) > 1 || std::abs(dz) > 1 || (dx == 0 && dz == 0)) return false;
  if (!walkable(a) || !walkable(b)) return false;
  if (std::abs(floor_height(a) - floor_height(b)) > step_height_) return false;
  if (dx != 0 && dz != 0) {
    // No corner cutting.
    const CellIndex side1{a.x + dx, a.z};
    const CellIndex side2{a.x, a.z + dz};
    if (!walkable(side1) || !walkable(side2)) return false;
    if (std::abs(floor_height(a) - floor_height(side1)) > step_height_ ||
        std::abs(floor_height(a) - floor_height(side2)) > step_height_) {
      return false;
    }
  }
  return true;
}

std::vector<CellIndex> NavGrid::neighbors(CellIndex c) const {
  std::vector<CellIndex> out;
  out.reserve(8);
  for (int k = 0; k < 8; ++k) {
    const CellIndex n{c.x + kDx[k], c.z + kDz[k]};
    if (adjacent(c, n)) out.push_back(n);
  }
  return out;
}

NavGrid bake(const LevelSpec& level, const NavBakeConfig& cfg) {
  if (!(cfg.cell_size > 0.0) ||
      cfg.cell_size > 2.0 * cfg.physics.half_extent.x + 1e-12) {
    throw NavError("cell size must be in (0, agent width]");
  }
  const Aabb& b = level.bounds;
  const int nx = static_cast<int>(std::floor((b.max.x - b.min.x) / cfg.cell_size));
  const int nz = static_cast<int>(std::floor((b.max.z - b.min.z) / cfg.cell_size));
  NavGrid grid(b.min, cfg.cell_size, nx, nz, cfg.step_height);

  // Authored geometry, including boxes that are missing collision.
  std::vector<Aabb> obstacles;
  for (const auto& box : level.boxes) {
    if (box.collides() || box.has(kNoCollide)) obstacles.push_back(box.bounds);
  }
  const Vec3 he = cfg.physics.half_extent;
  constexpr double kLift = 1e-6;

  for (int z = 0; z < nz; ++z) {
    for (int x = 0; x < nx; ++x) {
      const CellIndex c{x, z};
      const double cx = b.min.x + (x + 0.5) * cfg.cell_size;
      const double cz = b.min.z + (z + 0.5) * cfg.cell_size;
      // A box top is floor only where it covers the whole cell; partial
      // overlaps (thin walls) stay obstacles.
      const double x0 = cx - 0.5 * cfg.cell_size, x1 = cx + 0.5 * cfg.cell_size;
      const double z0 = cz - 0.5 * cfg.cell_size, z1 = cz + 0.5 * cfg.cell_size;
      double floor = b.min.y;
      for (const auto& o : obstacles) {
        if (o.min.x <= x0 && o.max.x >= x1 && o.min.z <= z0 && o.max.z >= z1) {
          floor = std::max(floor, o.max.y);
        }
      }
      // Anything lower than a step is stepped onto, so clearance starts there.
      Aabb body = Aabb::centered({cx, floor + he.y + kLift, cz}, he);
      // Bound walls are not obstacles: every in-bounds floor cell counts.
      bool ok = body.max.y <= b.max.y;
      body.min.y = floor + cfg.step_height;
      for (const auto& o : obstacles) {
        if (!ok) break;
        if (overlaps(body, o, 1e-9)) ok = false;
      }
      grid.set(c, ok, floor);
    }
  }
  const CellIndex spawn = grid.cell_of(level.spawn.position);
  if (!grid.walkable(spawn)) {
    throw NavError("degenerate level: no walkable cell under spawn");
  }
  return grid;
}

double move_cost(int orthogonal, int diagonal, double cell_size) {
  return cell_size * (orthogonal + kSqrt2 * diagonal);
}

std::optional<CellIndex> snap(const NavGrid& grid, const Vec3& p) {
  const CellIndex c = grid.cell_of(p);
  if (grid.walkable(c)) return c;
  std::optional<CellIndex> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int r = 1; r <= kSnapRadius; ++r) {
    for (int dz = -r; dz <= r; ++dz) {
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dz)) != r) continue;
        const CellIndex n{c.x + dx, c.z + dz};
        if (!grid.walkable(n)) continue;
        const Vec3 cc = grid.cell_center(n);
        const double d = std::hypot(cc.x - p.x, cc.z - p.z);
        if (d < best_d) {
          best_d = d;
          best = n;
        }
      }
    }
    if (best) return best;
  }
  return std::nullopt;
}

std::optional<NavPath> shortest_path(const NavGrid& grid, CellIndex from,
                                     CellIndex to, double agent_half_height) {
  if (!grid.walkable(from) || !grid.walkable(to)) return std::nullopt;
  const int n = grid.nx() * grid.nz();
  struct Cost {
    int orth = 0;
    int diag = 0;
  };
  std::vector<Cost> g(n);
  std::vector<double> g_value(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);

  auto heuristic = [&](CellIndex c) {
    const int dx = std::abs(c.x - to.x);
    const int dz = std::abs(c.z - to.z);
    return move_cost(std::max(dx, dz) - std::min(dx, dz), std::min(dx, dz),
                     grid.cell_size());
  };
  // (f, h, index): ties broken toward the goal, then by index.
  using Entry = std::tuple<double, double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const int start = grid.flat(from);
  const int goal = grid.flat(to);
  g_value[start] = 0.0;
  open.emplace(heuristic(from), heuristic(from), start);

  while (!open.empty()) {
    const auto [f, h, cur] = open.top();
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = 1;
    if (cur == goal) break;
    const CellIndex c = grid.unflat(cur);
    for (const CellIndex nb : grid.neighbors(c)) {
      const int ni = grid.flat(nb);
      if (closed[ni]) continue;
      const bool diagonal = nb.x != c.x && nb.z != c.z;
      Cost cand = g[cur];
      (diagonal ? cand.diag : cand.orth) += 1;
      const double value = move_cost(cand.orth, cand.diag, grid.cell_size());
      if (value < g_value[ni]) {
        g_value[ni] = value;
        g[ni] = cand;
        parent[ni] = cur;
        const double hn = heuristic(nb);
        open.emplace(value + hn, hn, ni);
      }
    }
  }
  if (!closed[goal]) return std::nullopt;

  NavPath path;
  for (int i = goal; i != -1; i = parent[i]) {
    path.cells.push_back(grid.unflat(i));
  }
  std::reverse(path.cells.begin(), path.cells.end());
  for (const auto& c : path.cells) {
    Vec3 p = grid.cell_center(c);
    p.y += agent_half_height;
    path.waypoints.push_back(p);
  }
  path.orthogonal_moves = g[goal].orth;
  path.diagonal_moves = g[goal].diag;
  path.length = g_value[goal];
  return path;
}

std::optional<NavPath> shortest_path(const NavGrid& grid, const Vec3& from,
                                     const Vec3& to, double agent_half_height) {
  const auto a = snap(grid, from);
  const auto b = snap(grid, to);
  if (!a || !b) return std::nullopt;
  return shortest_path(grid, *a, *b, agent_half_height);
}

Action scripted_policy(const NavPath& path, std::size_t& cursor,
                       const WorldState& state, const EnvConfig& cfg) {
  constexpr double kPopRadius = 0.5;
  constexpr double kAlignLimit = std::numbers::pi / 6.0;
  Action a;
  if (path.waypoints.empty()) return a;
  auto flat_dist = [&](const Vec3& w) {
    return std::hypot(w.x - state.position.x, w.z - state.position.z);
  };
  while (cursor + 1 < path.waypoints.size() &&
         flat_dist(path.waypoints[cursor]) < kPopRadius) {
    ++cursor;
  }
  cursor = std::min(cursor, path.waypoints.size() - 1);
  const Vec3 to = path.waypoints[cursor] - state.position;
  const double along = dot(to, facing(state.yaw));
  const double across = dot(to, right_of(state.yaw));
  if (std::hypot(along, across) < 1e-9) return a;
  const double err = std::atan2(across, along);
  const double max_turn =
      cfg.physics.turn_rate * cfg.physics.dt * cfg.action_repeat;
  a.turn = std::clamp(err / max_turn, -1.0, 1.0);
  a.forward = std::abs(err) < kAlignLimit ? 1.0 : 0.0;
  return a;
}

ScriptedAgent::ScriptedAgent(const LevelSpec& level, NavGrid grid,
                             EnvConfig cfg)
    : level_(&level), grid_(std::move(grid)), cfg_(cfg) {}

Action ScriptedAgent::act(const WorldState& state) {
  const int goals = static_cast<int>(level_->goals.size());
  const int gi = std::clamp(state.goal_index, 0, goals - 1);
  if (gi != planned_goal_) {
    planned_goal_ = gi;
    cursor_ = 0;
    path_ = shortest_path(grid_, state.position, level_->goals[gi].position,
                          cfg_.physics.half_extent.y);
    if (path_) {
      // Finish on the goal itself rather than its cell centre.
      Vec3 end = level_->goals[gi].position;
      path_->waypoints.push_back(end);
    }
  }
  if (!path_) return {};
  return scripted_policy(*path_, cursor_, state, cfg_);
}

std::string to_pgm(const NavGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.nx()) + " " +
                    std::to_string(grid.nz()) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(grid.nx()) * grid.nz());
  for (int z = grid.nz() - 1; z >= 0; --z) {
    for (int x = 0; x < grid.nx(); ++x) {
      out.push_back(static_cast<char>(grid.walkable({x, z}) ? 255 : 0));
    }
  }
  return out;
}

}  // namespace playtest
