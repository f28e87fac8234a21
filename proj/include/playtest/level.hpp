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

#ifndef PLAYTEST_LEVEL_HPP_
#define PLAYTEST_LEVEL_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "playtest/geometry.hpp"

namespace playtest {

enum BoxFlag : std::uint8_t {
  kSolid = 1 << 0,
  kClimbable = 1 << 1,
  // Authored geometry whose collision is missing: invisible to movement and
  // to rays, but still part of the level as drawn (and as baked by navmesh).
  kNoCollide = 1 << 2,
  kTrap = 1 << 3,
};

struct Box {
  Aabb bounds;
  std::uint8_t flags = kSolid;

  bool has(BoxFlag f) const { return (flags & f) != 0; }
  bool collides() const {
    return !has(kNoCollide) && (has(kSolid) || has(kClimbable));
  }
};

struct Goal {
  Vec3 position;
  double radius = 1.0;
};

struct Spawn {
  Vec3 position;
  double yaw = 0.0;  // radians
};

/// A box that ping-pongs between two waypoints at constant speed. `shape` is
/// expressed relative to the moving origin.
struct Platform {
  Aabb shape;
  Vec3 waypoint_a;
  Vec3 waypoint_b;
  double speed = 1.0;

  double path_length() const { return distance(waypoint_a, waypoint_b); }
};

struct LevelSpec {
  Aabb bounds;
  Spawn spawn;
  std::vector<Goal> goals;
  std::vector<Box> boxes;
  std::vector<Platform> platforms;

  /// Length of the bounds diagonal.
  double diagonal() const { return distance(bounds.min, bounds.max); }
};

/// Raised on malformed level text. `line()` is 1-based, 0 for whole-file
/// semantic errors.
class LevelError : public std::runtime_error {
 public:
  LevelError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

LevelSpec parse_level(std::string_view text);
LevelSpec load_level(const std::filesystem::path& path);

/// Canonical text form; parse_level(to_text(l)) reproduces l.
std::string to_text(const LevelSpec& level);

/// FNV-1a over the canonical text. Used in the worker handshake.
std::uint64_t level_hash(const LevelSpec& level);

}  // namespace playtest

#endif  // PLAYTEST_LEVEL_HPP_
