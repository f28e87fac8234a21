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

#ifndef PLAYTEST_ANALYTICS_HPP_
#define PLAYTEST_ANALYTICS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "playtest/env.hpp"
#include "playtest/level.hpp"
#include "playtest/ppo.hpp"

namespace playtest {

/// Top-down (x, z) visit counts over the level bounds.
class HeatMap {
 public:
  HeatMap() = default;
  HeatMap(Vec3 origin, double cell_size, int nx, int nz);
  static HeatMap for_level(const LevelSpec& level, double cell_size = 0.5);

  int nx() const { return nx_; }
  int nz() const { return nz_; }
  double cell_size() const { return cell_size_; }
  const Vec3& origin() const { return origin_; }

  /// Counts one visit. Positions outside the grid land in the nearest edge
  /// cell and are also tallied in overflow().
  void add(const Vec3& p);
  void add_goal_event(const Vec3& p) { goal_events_.push_back(p); }

  std::uint64_t count(int x, int z) const { return counts_[index(x, z)]; }
  std::uint64_t total() const { return total_; }
  std::uint64_t overflow() const { return overflow_; }
  std::uint64_t max_count() const;
  std::size_t nonzero_cells() const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  const std::vector<Vec3>& goal_events() const { return goal_events_; }

  /// Cell holding `p`, clamped to the grid.
  std::pair<int, int> cell_of(const Vec3& p) const;

  /// Cellwise sum; grids must match.
  void merge(const HeatMap& other);

 private:
  std::size_t index(int x, int z) const {
    return static_cast<std::size_t>(z) * nx_ + x;
  }

  Vec3 origin_;
  double cell_size_ = 0.5;
  int nx_ = 0;
  int nz_ = 0;
  std::vector<std::uint64_t> counts_;
  std::vector<Vec3> goal_events_;
  std::uint64_t total_ = 0;
  std::uint64_t overflow_ = 0;
};

void accumulate(HeatMap& map, std::span<const Vec3> positions);
/// Adds every transition position, and goal events as overlay points.
void accumulate(HeatMap& map, const Trajectory& traj);

/// P5 greymap, row 0 at max z. Intensity round(255 ln(1+n) / ln(1+n_max));
/// goal events drawn at 255.
std::string heatmap_pgm(const HeatMap& map);
void export_heatmap(const HeatMap& map, const std::filesystem::path& path);

/// Shannon entropy (nats) of the visit distribution. Throws on an empty map.
double coverage_entropy(const HeatMap& map);

struct EpisodeEndRecord {
  Vec3 final_position;
  Termination reason = Termination::kTimeout;
  int decision_step = 0;
  std::uint64_t frame_index = 0;
  int goal_index = 0;  // goals completed
  double episode_return = 0.0;
};

struct StuckCluster {
  Vec3 centroid;
  Aabb extent;  // union of member cells (y spans the level)
  std::uint64_t count = 0;
  double share = 0.0;  // of all timeouts
  int cells = 0;
  int trap = -1;  // index into level.boxes of the matched trap, or -1
};

struct StuckReport {
  std::vector<StuckCluster> clusters;
  std::uint64_t timeouts = 0;
  int traps = 0;
  int traps_found = 0;
  int false_positives = 0;

  double recall() const {
    return traps > 0 ? static_cast<double>(traps_found) / traps : 0.0;
  }
  double precision() const {
    return clusters.empty()
               ? 0.0
               : static_cast<double>(clusters.size() - false_positives) /
                     clusters.size();
  }
};

/// Bins timeout positions, flood-fills 8-connected cells holding at least
/// `min_count` of them, and matches each cluster centroid against the trap
/// boxes' footprints. Non-timeout records are ignored.
StuckReport stuck_report(std::span<const EpisodeEndRecord> records,
                         const LevelSpec& level, double cell_size = 0.5,
                         int min_count = 3);

struct DefectCrossings {
  int box = -1;  // index into level.boxes
  std::uint64_t crossings = 0;
};

struct ExploitReport {
  std::vector<DefectCrossings> defects;
  std::uint64_t episodes = 0;
  std::uint64_t episodes_with_crossing = 0;
  // Mean travelled distance over episodes that reached every goal.
  std::optional<double> mean_path_with_crossing;
  std::optional<double> mean_path_without_crossing;

  std::uint64_t total_crossings() const;
  double crossing_fraction() const {
    return episodes ? static_cast<double>(episodes_with_crossing) / episodes
                    : 0.0;
  }
};

/// One episode's decision-level path, starting at the spawn.
struct EpisodePath {
  std::vector<Vec3> points;
  bool reached_all_goals = false;
};

/// Splits trajectories at done flags. Each trajectory must begin at an
/// episode start; a trailing unfinished segment becomes its own episode.
std::vector<EpisodePath> episode_paths(std::span<const Trajectory> trajectories,
                                       const LevelSpec& level);

/// Number of entries into `box` along the polyline: each maximal run of
/// consecutive segments touching the box counts once.
std::uint64_t count_crossings(std::span<const Vec3> points, const Aabb& box);

ExploitReport exploit_report(std::span<const EpisodePath> episodes,
                             const LevelSpec& level);
ExploitReport exploit_report(std::span<const Trajectory> trajectories,
                             const LevelSpec& level);

struct CurvePoint {
  std::uint64_t env_frames = 0;
  double mean_episode_reward = 0.0;
  std::uint64_t episodes = 0;
  double steps_per_sec = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

std::string curve_csv(std::span<const CurvePoint> curve);
void write_curve_csv(std::span<const CurvePoint> curve,
                     const std::filesystem::path& path);
/// Throws std::runtime_error on missing or malformed files.
std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path);

struct DifficultyReport {
  std::optional<std::uint64_t> frames_to_50pct;
  std::optional<std::uint64_t> frames_to_80pct;
  double max_smoothed_reward = 0.0;
  int seeds = 1;
};

/// Centred moving average with a window that shrinks at the ends.
std::vector<double> smooth(std::span<const double> values, int window = 5);

/// First frame at which the smoothed curve reaches each fraction of its own
/// peak. Requires >= 2 points with strictly increasing frames.
DifficultyReport difficulty(std::span<const CurvePoint> curve, int window = 5);
/// As above against an externally supplied peak.
DifficultyReport difficulty(std::span<const CurvePoint> curve,
                            double reference_max, int window = 5);

/// Pointwise median across seed curves sharing the same frame column.
std::vector<CurvePoint> median_curve(
    std::span<const std::vector<CurvePoint>> curves);

}  // namespace playtest

#endif  // PLAYTEST_ANALYTICS_HPP_
