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

#include "playtest/analytics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace playtest {

HeatMap::HeatMap(Vec3 origin, double cell_size, int nx, int nz)
    : origin_(origin),
      cell_size_(cell_size),
      nx_(nx),
      nz_(nz),
      counts_(static_cast<std::size_t>(nx) * nz, 0) {
  if (nx < 1 || nz < 1 || !(cell_size > 0.0)) {
    throw std::invalid_argument("heatmap needs a positive size");
  }
}

HeatMap HeatMap::for_level(const LevelSpec& level, double cell_size) {
  const auto& b = level.bounds;
  const int nx = std::max(1, static_cast<int>(std::ceil((b.max.x - b.min.x) / cell_size - 1e-9)));
  const int nz = std::max(1, static_cast<int>(std::ceil((b.max.z - b.min.z) / cell_size - 1e-9)));
  return HeatMap(b.min, cell_size, nx, nz);
}

std::pair<int, int> HeatMap::cell_of(const Vec3& p) const {
  const double fx = std::floor((p.x - origin_.x) / cell_size_);
  const double fz = std::floor((p.z - origin_.z) / cell_size_);
  const int x = static_cast<int>(std::clamp(fx, 0.0, nx_ - 1.0));
  const int z = static_cast<int>(std::clamp(fz, 0.0, nz_ - 1.0));
  return {x, z};
}

void HeatMap::add(const Vec3& p) {
  const double fx = std::floor((p.x - origin_.x) / cell_size_);
  const double fz = std::floor((p.z - origin_.z) / cell_size_);
  if (!(fx >= 0 && fx < nx_ && fz >= 0 && fz < nz_)) ++overflow_;
  const auto [x, z] = cell_of(p);
  ++counts_[index(x, z)];
  ++total_;
}

std::uint64_t HeatMap::max_count() const {
  return counts_.empty() ? 0 : *std::max_element(counts_.begin(), counts_.end());
}

std::size_t HeatMap::nonzero_cells() const {
  return static_cast<std::size_t>(std::count_if(
      counts_.begin(), counts_.end(), [](std::uint64_t c) { return c > 0; }));
}

void HeatMap::merge(const HeatMap& other) {
  if (other.nx_ != nx_ || other.nz_ != nz_ || other.cell_size_ != cell_size_ ||
      !(other.origin_ == origin_)) {
    throw std::invalid_argument("heatmap grids differ");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  goal_events_.insert(goal_events_.end(), other.goal_events_.begin(),
                      other.goal_events_.end());
  total_ += other.total_;
  overflow_ += other.overflow_;
}

void accumulate(HeatMap& map, std::span<const Vec3> positions) {
  for (const auto& p : positions) map.add(p);
}

void accumulate(HeatMap& map, const Trajectory& traj) {
  for (const auto& s : traj.steps) {
    const Vec3 p{s.position[0], s.position[1], s.position[2]};
    map.add(p);
    if (s.events & kEventGoal) map.add_goal_event(p);
  }
}

std::string heatmap_pgm(const HeatMap& map) {
  std::string out = "P5\n" + std::to_string(map.nx()) + " " +
                    std::to_string(map.nz()) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(map.nx()) * map.nz(), '\0');
  const std::uint64_t peak = map.max_count();
  const double denom = std::log1p(static_cast<double>(peak));
  auto pixel = [&](int x, int z) -> char& {
    return out[header + static_cast<std::size_t>(map.nz() - 1 - z) * map.nx() + x];
  };
  if (peak > 0) {
    for (int z = 0; z < map.nz(); ++z) {
      for (int x = 0; x < map.nx(); ++x) {
        const double n = static_cast<double>(map.count(x, z));
        const long v = std::lround(255.0 * std::log1p(n) / denom);
        pixel(x, z) = static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0L, 255L)));
      }
    }
  }
  for (const auto& g : map.goal_events()) {
    const auto [x, z] = map.cell_of(g);
    pixel(x, z) = static_cast<char>(255);
  }
  return out;
}

void export_heatmap(const HeatMap& map, const std::filesystem::path& path) {
  const std::string bytes = heatmap_pgm(map);
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

double coverage_entropy(const HeatMap& map) {
  if (map.total() == 0) throw std::invalid_argument("coverage_entropy: empty heatmap");
  const double total = static_cast<double>(map.total());
  double h = 0.0;
  for (std::uint64_t c : map.counts()) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

StuckReport stuck_report(std::span<const EpisodeEndRecord> records,
                         const LevelSpec& level, double cell_size,
                         int min_count) {
  StuckReport report;
  for (const auto& b : level.boxes) {
    if (b.has(kTrap)) ++report.traps;
  }
  HeatMap grid = HeatMap::for_level(level, cell_size);
  std::vector<std::vector<const EpisodeEndRecord*>> members(
      static_cast<std::size_t>(grid.nx()) * grid.nz());
  for (const auto& r : records) {
    if (r.reason != Termination::kTimeout) continue;
    ++report.timeouts;
    grid.add(r.final_position);
    const auto [x, z] = grid.cell_of(r.final_position);
    members[static_cast<std::size_t>(z) * grid.nx() + x].push_back(&r);
  }
  if (report.timeouts == 0) return report;

  const int nx = grid.nx();
  const int nz = grid.nz();
  auto hot = [&](int x, int z) {
    return x >= 0 && z >= 0 && x < nx && z < nz &&
           grid.count(x, z) >= static_cast<std::uint64_t>(min_count);
  };
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(nx) * nz, 0);
  std::vector<bool> trap_found(level.boxes.size(), false);
  for (int z0 = 0; z0 < nz; ++z0) {
    for (int x0 = 0; x0 < nx; ++x0) {
      if (!hot(x0, z0) || seen[static_cast<std::size_t>(z0) * nx + x0]) continue;
      StuckCluster c;
      Vec3 sum;
      c.extent = {{std::numeric_limits<double>::infinity(), level.bounds.min.y,
                   std::numeric_limits<double>::infinity()},
                  {-std::numeric_limits<double>::infinity(), level.bounds.max.y,
                   -std::numeric_limits<double>::infinity()}};
      std::vector<std::pair<int, int>> stack{{x0, z0}};
      seen[static_cast<std::size_t>(z0) * nx + x0] = 1;
      while (!stack.empty()) {
        const auto [x, z] = stack.back();
        stack.pop_back();
        ++c.cells;
        for (const auto* r : members[static_cast<std::size_t>(z) * nx + x]) {
          sum += r->final_position;
          ++c.count;
        }
        const double lx = grid.origin().x + x * cell_size;
        const double lz = grid.origin().z + z * cell_size;
        c.extent.min.x = std::min(c.extent.min.x, lx);
        c.extent.min.z = std::min(c.extent.min.z, lz);
        c.extent.max.x = std::max(c.extent.max.x, lx + cell_size);
        c.extent.max.z = std::max(c.extent.max.z, lz + cell_size);
        for (int dz = -1; dz <= 1; ++dz) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ax = x + dx;
            const int az = z + dz;
            if (!hot(ax, az)) continue;
            auto& s = seen[static_cast<std::size_t>(az) * nx + ax];
            if (s) continue;
            s = 1;
            stack.emplace_back(ax, az);
          }
        }
      }
      c.centroid = sum * (1.0 / static_cast<double>(c.count));
      c.share = static_cast<double>(c.count) / static_cast<double>(report.timeouts);
      for (std::size_t i = 0; i < level.boxes.size(); ++i) {
        const auto& b = level.boxes[i];
        if (!b.has(kTrap)) continue;
        if (c.centroid.x >= b.bounds.min.x && c.centroid.x <= b.bounds.max.x &&
            c.centroid.z >= b.bounds.min.z && c.centroid.z <= b.bounds.max.z) {
          c.trap = static_cast<int>(i);
          trap_found[i] = true;
          break;
        }
      }
      if (c.trap < 0) ++report.false_positives;
      report.clusters.push_back(c);
    }
  }
  report.traps_found = static_cast<int>(
      std::count(trap_found.begin(), trap_found.end(), true));
  return report;
}

std::uint64_t ExploitReport::total_crossings() const {
  std::uint64_t n = 0;
  for (const auto& d : defects) n += d.crossings;
  return n;
}

std::vector<EpisodePath> episode_paths(std::span<const Trajectory> trajectories,
                                       const LevelSpec& level) {
  std::vector<EpisodePath> out;
  for (const auto& t : trajectories) {
    EpisodePath cur;
    cur.points.push_back(level.spawn.position);
    for (const auto& s : t.steps) {
      cur.points.push_back({s.position[0], s.position[1], s.position[2]});
      if (s.done) {
        cur.reached_all_goals = (s.events & kEventAllGoals) != 0;
        out.push_back(std::move(cur));
        cur = EpisodePath{};
        cur.points.push_back(level.spawn.position);
      }
    }
    if (cur.points.size() > 1) out.push_back(std::move(cur));
  }
  return out;
}

std::uint64_t count_crossings(std::span<const Vec3> points, const Aabb& box) {
  std::uint64_t n = 0;
  bool inside_run = false;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const bool hit = segment_intersects(points[i - 1], points[i], box);
    if (hit && !inside_run) ++n;
    inside_run = hit;
  }
  return n;
}

ExploitReport exploit_report(std::span<const EpisodePath> episodes,
                             const LevelSpec& level) {
  ExploitReport r;
  for (std::size_t i = 0; i < level.boxes.size(); ++i) {
    if (level.boxes[i].has(kNoCollide)) r.defects.push_back({static_cast<int>(i), 0});
  }
  double with_sum = 0.0, without_sum = 0.0;
  std::uint64_t with_n = 0, without_n = 0;
  for (const auto& ep : episodes) {
    ++r.episodes;
    std::uint64_t crossings = 0;
    for (auto& d : r.defects) {
      const auto c = count_crossings(ep.points, level.boxes[d.box].bounds);
      d.crossings += c;
      crossings += c;
    }
    if (crossings > 0) ++r.episodes_with_crossing;
    if (ep.reached_all_goals) {
      double len = 0.0;
      for (std::size_t i = 1; i < ep.points.size(); ++i) {
        len += distance(ep.points[i - 1], ep.points[i]);
      }
      if (crossings > 0) {
        with_sum += len;
        ++with_n;
      } else {
        without_sum += len;
        ++without_n;
      }
    }
  }
  if (with_n) r.mean_path_with_crossing = with_sum / static_cast<double>(with_n);
  if (without_n) r.mean_path_without_crossing = without_sum / static_cast<double>(without_n);
  return r;
}

ExploitReport exploit_report(std::span<const Trajectory> trajectories,
                             const LevelSpec& level) {
  const auto eps = episode_paths(trajectories, level);
  return exploit_report(std::span<const EpisodePath>(eps), level);
}

std::string curve_csv(std::span<const CurvePoint> curve) {
  std::string out = "env_frames,mean_episode_reward,episodes,steps_per_sec\n";
  char line[160];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof line, "%" PRIu64 ",%.9g,%" PRIu64 ",%.6g\n",
                  p.env_frames, p.mean_episode_reward, p.episodes,
                  p.steps_per_sec);
    out += line;
  }
  return out;
}

void write_curve_csv(std::span<const CurvePoint> curve,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << curve_csv(curve);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing curve: " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("env_frames,mean_episode_reward", 0) != 0) {
    throw std::runtime_error("bad curve header in " + path.string());
  }
  std::vector<CurvePoint> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    CurvePoint p;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%" SCNu64 ",%lf,%" SCNu64 ",%lf%c",
                    &p.env_frames, &p.mean_episode_reward, &p.episodes,
                    &p.steps_per_sec, &tail) != 4) {
      throw std::runtime_error("unparsable curve row " + std::to_string(row) +
                               " in " + path.string());
    }
    out.push_back(p);
  }
  return out;
}

std::vector<double> smooth(std::span<const double> values, int window) {
  const int n = static_cast<int>(values.size());
  const int half = std::max(0, window / 2);
  std::vector<double> out(values.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += values[k];
    out[i] = s / (hi - lo + 1);
  }
  return out;
}

namespace {

void check_curve(std::span<const CurvePoint> curve) {
  if (curve.size() < 2) throw std::invalid_argument("difficulty: curve needs >= 2 points");
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].env_frames <= curve[i - 1].env_frames) {
      throw std::invalid_argument("difficulty: frames must increase strictly");
    }
  }
}

}  // namespace

DifficultyReport difficulty(std::span<const CurvePoint> curve,
                            double reference_max, int window) {
  check_curve(curve);
  std::vector<double> r(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) r[i] = curve[i].mean_episode_reward;
  const auto s = smooth(r, window);
  DifficultyReport rep;
  rep.max_smoothed_reward = *std::max_element(s.begin(), s.end());
  // Relative slack so exact-threshold hits survive rounding in the average.
  const double slack = 1e-9 * std::max(1.0, std::abs(reference_max));
  auto first_at = [&](double p) -> std::optional<std::uint64_t> {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= p * reference_max - slack) return curve[i].env_frames;
    }
    return std::nullopt;
  };
  rep.frames_to_50pct = first_at(0.5);
  rep.frames_to_80pct = first_at(0.8);
  return rep;
}

DifficultyReport difficulty(std::span<const CurvePoint> curve, int window) {
  check_curve(curve);
  std::vector<double> r(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) r[i] = curve[i].mean_episode_reward;
  const auto s = smooth(r, window);
  return difficulty(curve, *std::max_element(s.begin(), s.end()), window);
}

std::vector<CurvePoint> median_curve(
    std::span<const std::vector<CurvePoint>> curves) {
  if (curves.empty()) return {};
  std::size_t n = curves[0].size();
  for (const auto& c : curves) n = std::min(n, c.size());
  std::vector<CurvePoint> out(n);
  std::vector<double> vals;
  for (std::size_t i = 0; i < n; ++i) {
    vals.clear();
    for (const auto& c : curves) vals.push_back(c[i].mean_episode_reward);
    std::sort(vals.begin(), vals.end());
    const std::size_t k = vals.size();
    out[i].env_frames = curves[0][i].env_frames;
    out[i].mean_episode_reward =
        k % 2 ? vals[k / 2] : 0.5 * (vals[k / 2 - 1] + vals[k / 2]);
    for (const auto& c : curves) out[i].episodes += c[i].episodes;
  }
  return out;
}

}  // namespace playtest
