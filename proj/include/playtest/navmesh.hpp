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

#ifndef PLAYTEST_NAVMESH_HPP_
#define PLAYTEST_NAVMESH_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "playtest/env.hpp"
#include "playtest/level.hpp"
#include "playtest/sim.hpp"

namespace playtest {

class NavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CellIndex {
  int x = 0;
  int z = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Top-down walkability grid with a floor height per cell. Cell (x, z) spans
/// [origin + (x, z) * cell_size, origin + (x + 1, z + 1) * cell_size).
class NavGrid {
 public:
  NavGrid() = default;
  NavGrid(Vec3 origin, double cell_size, int nx, int nz, double step_height);

  /// Flat grid from a row-major (z-major) occupancy mask; nonzero = walkable.
  static NavGrid from_mask(int nx, int nz, const std::vector<std::uint8_t>& mask,
                           double cell_size = 1.0);

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  double cell_size() const { return cell_size_; }
  const Vec3& origin() const { return origin_; }
  double step_height() const { return step_height_; }

  bool in_range(CellIndex c) const {
    return c.x >= 0 && c.z >= 0 && c.x < nx_ && c.z < nz_;
  }
  bool walkable(CellIndex c) const {
    return in_range(c) && walkable_[flat(c)] != 0;
  }
  double floor_height(CellIndex c) const { return floor_[flat(c)]; }
  void set(CellIndex c, bool walkable, double floor_height);

  std::size_t walkable_count() const;

  /// Cell containing the horizontal projection of `p` (may be out of range).
  CellIndex cell_of(const Vec3& p) const;
  /// Floor-level centre of a cell.
  Vec3 cell_center(CellIndex c) const;

  /// 8-connected adjacency: both cells walkable, floor step within limit,
  /// and for diagonals both orthogonal neighbours walkable.
  bool adjacent(CellIndex a, CellIndex b) const;

  /// Neighbours of `c` satisfying adjacent(), in a fixed order.
  std::vector<CellIndex> neighbors(CellIndex c) const;

  int flat(CellIndex c) const { return c.z * nx_ + c.x; }
  CellIndex unflat(int i) const { return {i % nx_, i / nx_}; }

 private:
  Vec3 origin_;
  double cell_size_ = 1.0;
  int nx_ = 0;
  int nz_ = 0;
  double step_height_ = 0.55;
  std::vector<std::uint8_t> walkable_;
  std::vector<double> floor_;
};

struct NavBakeConfig {
  double cell_size = 0.5;
  double step_height = 0.55;
  PhysicsConfig physics;
};

/// Bakes walkability from authored geometry: missing-collision boxes count as
/// obstacles, platforms and trap volumes are ignored, climbable faces give no
/// links. Throws NavError when the spawn has no walkable cell.
NavGrid bake(const LevelSpec& level, const NavBakeConfig& cfg = {});

struct NavPath {
  std::vector<Vec3> waypoints;  // agent-centre height
  std::vector<CellIndex> cells;
  // Grid-graph cost in world units: cell_size * (orthogonal + sqrt2 * diagonal).
  double length = 0.0;
  int orthogonal_moves = 0;
  int diagonal_moves = 0;
};

/// Grid cost of a move count pair; shared by the planner and by anything
/// comparing costs for exact equality.
double move_cost(int orthogonal, int diagonal, double cell_size);

/// Nearest walkable cell to `p` within a few cells, or nullopt.
std::optional<CellIndex> snap(const NavGrid& grid, const Vec3& p);

/// A* with the octile heuristic. nullopt when unreachable or when either end
/// has no walkable cell nearby.
std::optional<NavPath> shortest_path(const NavGrid& grid, const Vec3& from,
                                     const Vec3& to,
                                     double agent_half_height = 0.9);
std::optional<NavPath> shortest_path(const NavGrid& grid, CellIndex from,
                                     CellIndex to,
                                     double agent_half_height = 0.9);

/// Pure-pursuit follower step. Advances `cursor` past waypoints within the
/// pop radius, turns toward the current one, drives forward only when
/// aligned within 30 degrees. Never jumps.
Action scripted_policy(const NavPath& path, std::size_t& cursor,
                       const WorldState& state, const EnvConfig& cfg);

/// The navmesh baseline agent: plans to the active goal in level order and
/// follows the plan, replanning whenever the active goal changes.
class ScriptedAgent {
 public:
  ScriptedAgent(const LevelSpec& level, NavGrid grid, EnvConfig cfg);

  Action act(const WorldState& state);
  const std::optional<NavPath>& path() const { return path_; }

 private:
  const LevelSpec* level_;
  NavGrid grid_;
  EnvConfig cfg_;
  int planned_goal_ = -1;
  std::optional<NavPath> path_;
  std::size_t cursor_ = 0;
};

/// Binary PGM (P5): 255 walkable, 0 blocked; row 0 is the max-z edge.
std::string to_pgm(const NavGrid& grid);

}  // namespace playtest

#endif  // PLAYTEST_NAVMESH_HPP_
