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

#include "playtest/app.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "playtest/navmesh.hpp"

namespace playtest {
namespace fs = std::filesystem;
namespace {

void log_to(const std::function<void(const std::string&)>& log, const std::string& m) {
  if (log) log(m);
}

std::string padded(std::uint64_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*" PRIu64, width, v);
  return buf;
}

std::string_view reason_name(Termination t) {
  switch (t) {
    case Termination::kNone: return "none";
    case Termination::kTimeout: return "timeout";
    case Termination::kAllGoals: return "all_goals";
  }
  return "none";
}

nlohmann::json record_json(const EpisodeEndRecord& r) {
  return {{"frame", r.frame_index},
          {"decision_step", r.decision_step},
          {"reason", reason_name(r.reason)},
          {"goals", r.goal_index},
          {"return", r.episode_return},
          {"x", r.final_position.x},
          {"y", r.final_position.y},
          {"z", r.final_position.z}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string hidden_text(std::span<const int> hidden) {
  std::string s = "[";
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(hidden[i]);
  }
  return s + "]";
}

}  // namespace

LevelSpec load_config_level(const RunConfig& cfg) {
  const fs::path p = cfg.level_path();
  if (!fs::is_regular_file(p)) throw ConfigError(0, "level not found: " + p.string());
  try {
    return load_level(p);
  } catch (const LevelError& e) {
    throw ConfigError(0, p.string() + ": " + e.what());
  }
}

fs::path seed_dir(const fs::path& out, std::uint64_t seed) {
  return out / ("seed_" + std::to_string(seed));
}

TrainArtifacts run_training(const RunConfig& cfg, const LevelSpec& level,
                            std::uint64_t seed, const fs::path& dir,
                            const TrainRunOptions& opts) {
  cfg.validate();
  TrainArtifacts art;
  art.dir = dir;
  fs::create_directories(dir / "checkpoints");
  fs::create_directories(dir / "heatmaps");
  write_text(dir / "run.cfg", to_text(cfg));

  std::unique_ptr<LocalRolloutSource> local;
  RolloutSource* source = opts.source;
  if (source == nullptr) {
    local = std::make_unique<LocalRolloutSource>(level, cfg.env, cfg.train,
                                                 worker_seed(seed, 0));
    source = local.get();
  }

  std::ofstream episodes;
  if (cfg.analytics.record_episodes) {
    episodes.open(dir / "episodes.jsonl", std::ios::binary);
  }
  const std::uint64_t interval = cfg.analytics.heatmap_interval;
  HeatMap window = HeatMap::for_level(level, cfg.analytics.heatmap_cell);
  std::uint64_t window_index = 0;
  std::uint64_t window_end_frames = 0;

  auto flush_window = [&] {
    if (window.total() == 0) return;
    CoverageWindow w;
    w.frames_begin = window_index * interval;
    w.frames_end = window_end_frames;
    w.visits = window.total();
    w.entropy = coverage_entropy(window);
    w.heatmap = dir / "heatmaps" / ("heatmap_" + padded(w.frames_end, 10) + ".pgm");
    export_heatmap(window, w.heatmap);
    art.coverage.push_back(w);
    window = HeatMap::for_level(level, cfg.analytics.heatmap_cell);
  };

  TrainHooks hooks;
  hooks.record_timing = cfg.analytics.record_timing;
  hooks.should_stop = opts.should_stop;
  hooks.on_checkpoint = [&](const PolicyParams& p) {
    const fs::path path =
        dir / "checkpoints" / ("policy_v" + padded(p.version(), 6) + ".ptfg");
    save_checkpoint(p, path);
    art.checkpoints.push_back(path);
  };
  hooks.on_iteration = [&](const IterationReport& r) {
    const std::uint64_t idx = r.frames_before / interval;
    if (idx != window_index) {
      flush_window();
      window_index = idx;
    }
    for (const auto& c : *r.chunks) {
      for (const auto& t : c.trajectories) accumulate(window, t);
    }
    window_end_frames = r.frames_after;
    if (episodes.is_open()) {
      for (const auto& e : *r.finished) episodes << record_json(e).dump() << '\n';
    }
    if (r.iteration % 10 == 0) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "iter %d frames %" PRIu64 " reward %.3f episodes %" PRIu64,
                    r.iteration, r.frames_after, r.curve_point->mean_episode_reward,
                    r.curve_point->episodes);
      log_to(opts.log, buf);
    }
    if (opts.on_iteration) opts.on_iteration(r);
  };

  art.result = train(level, cfg.env, cfg.train, seed, *source, hooks);
  flush_window();

  save_checkpoint(art.result.params, dir / "policy.ptfg");
  write_curve_csv(art.result.curve, dir / "curve.csv");
  std::ostringstream cov;
  cov << "frames_begin,frames_end,visits,entropy\n";
  for (const auto& w : art.coverage) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%.9g\n",
                  w.frames_begin, w.frames_end, w.visits, w.entropy);
    cov << buf;
  }
  write_text(dir / "coverage.csv", cov.str());
  return art;
}

std::string_view to_string(EvalPolicy p) {
  switch (p) {
    case EvalPolicy::kScripted: return "scripted";
    case EvalPolicy::kRandom: return "random";
    case EvalPolicy::kRl: return "rl";
  }
  return "scripted";
}

EvalPolicy parse_eval_policy(std::string_view s) {
  for (EvalPolicy p : {EvalPolicy::kScripted, EvalPolicy::kRandom, EvalPolicy::kRl}) {
    if (s == to_string(p)) return p;
  }
  throw std::invalid_argument("unknown eval policy '" + std::string(s) +
                              "' (scripted, random, rl)");
}

EvalPolicy eval_policy_for(RunMode mode) {
  switch (mode) {
    case RunMode::kScriptedEval: return EvalPolicy::kScripted;
    case RunMode::kRandomEval: return EvalPolicy::kRandom;
    case RunMode::kRlEval:
    case RunMode::kRlTrain: return EvalPolicy::kRl;
  }
  return EvalPolicy::kRl;
}

void check_checkpoint_matches(const PolicyParams& params, const TrainConfig& train) {
  const Architecture& a = params.arch();
  if (a.obs_dim != Observation::kSize || a.act_dim != Action::kSize ||
      a.hidden != train.hidden) {
    throw ConfigError(
        0, "checkpoint dims mismatch: expected obs=" + std::to_string(Observation::kSize) +
               " act=" + std::to_string(Action::kSize) +
               " hidden=" + hidden_text(train.hidden) +
               ", found obs=" + std::to_string(a.obs_dim) +
               " act=" + std::to_string(a.act_dim) + " hidden=" + hidden_text(a.hidden));
  }
}

EvalReport run_eval(const RunConfig& cfg, const LevelSpec& level,
                    const EvalOptions& opts) {
  if (opts.episodes < 1) throw ConfigError(0, "eval needs at least one episode");
  EvalReport rep;
  rep.policy = opts.policy;
  rep.episodes = opts.episodes;
  rep.level = cfg.level_path().stem().string();
  rep.heatmap = HeatMap::for_level(level, cfg.analytics.heatmap_cell);

  PolicyParams params;
  std::optional<NavGrid> grid;
  if (opts.policy == EvalPolicy::kRl) {
    if (opts.checkpoint.empty()) throw ConfigError(0, "rl eval needs a checkpoint");
    if (!fs::is_regular_file(opts.checkpoint)) {
      throw ConfigError(0, "checkpoint not found: " + opts.checkpoint.string());
    }
    params = load_checkpoint(opts.checkpoint);
    check_checkpoint_matches(params, cfg.train);
  } else if (opts.policy == EvalPolicy::kScripted) {
    NavBakeConfig bc;
    bc.physics = cfg.env.physics;
    grid = bake(level, bc);
  }

  std::vector<Trajectory> trajs;
  trajs.reserve(opts.episodes);
  std::uint64_t frames = 0;
  for (int ep = 0; ep < opts.episodes; ++ep) {
    ActionFn act;
    std::shared_ptr<ScriptedAgent> agent;
    std::shared_ptr<Rng> rng;
    switch (opts.policy) {
      case EvalPolicy::kRl:
        act = [&params](const WorldState&, const Observation& obs) {
          const PolicyOutput out = forward(params, obs.values);
          return Action{out.mean[0], out.mean[1], out.mean[2], out.mean[3]};
        };
        break;
      case EvalPolicy::kScripted:
        agent = std::make_shared<ScriptedAgent>(level, *grid, cfg.env);
        act = [agent](const WorldState& s, const Observation&) { return agent->act(s); };
        break;
      case EvalPolicy::kRandom:
        rng = std::make_shared<Rng>(derive_seed(opts.seed, 1000 + ep));
        act = [rng](const WorldState&, const Observation&) {
          Action a;
          a.forward = rng->uniform(-1.0, 1.0);
          a.turn = rng->uniform(-1.0, 1.0);
          a.strafe = rng->uniform(-1.0, 1.0);
          a.jump = rng->uniform(-1.0, 1.0);
          return a;
        };
        break;
    }
    Trajectory t = run_episode(level, cfg.env, act, opts.seed);
    EpisodeEndRecord rec;
    for (const auto& s : t.steps) {
      rec.episode_return += s.reward;
      if (s.events & kEventGoal) ++rec.goal_index;
    }
    const Transition& last = t.steps.back();
    rec.final_position = {last.position[0], last.position[1], last.position[2]};
    rec.reason = (last.events & kEventAllGoals) ? Termination::kAllGoals
                                                : Termination::kTimeout;
    rec.decision_step = static_cast<int>(t.steps.size());
    frames += t.steps.size() * static_cast<std::uint64_t>(cfg.env.action_repeat);
    rec.frame_index = frames;
    rep.records.push_back(rec);
    rep.mean_reward += rec.episode_return;
    rep.mean_length += rec.decision_step;
    rep.mean_goals += rec.goal_index;
    if (rec.reason == Termination::kAllGoals) ++rep.completed;
    accumulate(rep.heatmap, t);
    trajs.push_back(std::move(t));
  }
  rep.mean_reward /= opts.episodes;
  rep.mean_length /= opts.episodes;
  rep.mean_goals /= opts.episodes;
  rep.exploit = exploit_report(std::span<const Trajectory>(trajs), level);
  rep.stuck = stuck_report(rep.records, level, cfg.analytics.heatmap_cell,
                           cfg.analytics.stuck_min_count);
  rep.coverage_entropy = coverage_entropy(rep.heatmap);
  return rep;
}

std::string eval_text(const EvalReport& r) {
  std::ostringstream o;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "level %s, policy %s, %d episodes\n"
                "  mean reward %.4f, mean length %.1f decisions, mean goals %.2f, "
                "completed %d\n"
                "  coverage entropy %.4f nats over %zu cells\n",
                r.level.c_str(), std::string(to_string(r.policy)).c_str(), r.episodes,
                r.mean_reward, r.mean_length, r.mean_goals, r.completed,
                r.coverage_entropy, r.heatmap.nonzero_cells());
  o << buf;
  std::snprintf(buf, sizeof(buf), "exploit: %" PRIu64 " of %" PRIu64
                " episodes crossed a defect (%.1f%%)\n",
                r.exploit.episodes_with_crossing, r.exploit.episodes,
                100.0 * r.exploit.crossing_fraction());
  o << buf;
  for (const auto& d : r.exploit.defects) {
    std::snprintf(buf, sizeof(buf), "  box %d: %" PRIu64 " crossings\n", d.box,
                  d.crossings);
    o << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "stuck: %" PRIu64 " timeouts, %zu clusters, traps found %d/%d, "
                "false positives %d\n",
                r.stuck.timeouts, r.stuck.clusters.size(), r.stuck.traps_found,
                r.stuck.traps, r.stuck.false_positives);
  o << buf;
  for (const auto& c : r.stuck.clusters) {
    std::snprintf(buf, sizeof(buf),
                  "  cluster at (%.2f, %.2f): %" PRIu64 " timeouts (%.1f%%), %d cells, %s\n",
                  c.centroid.x, c.centroid.z, c.count, 100.0 * c.share, c.cells,
                  c.trap >= 0 ? ("trap box " + std::to_string(c.trap)).c_str()
                              : "no trap");
    o << buf;
  }
  return o.str();
}

std::string eval_jsonl(const EvalReport& r) {
  std::ostringstream o;
  nlohmann::json level = {
      {"record", "level"},
      {"level", r.level},
      {"policy", to_string(r.policy)},
      {"episodes", r.episodes},
      {"mean_reward", r.mean_reward},
      {"mean_length", r.mean_length},
      {"mean_goals", r.mean_goals},
      {"completed", r.completed},
      {"coverage_entropy", r.coverage_entropy},
      {"crossing_fraction", r.exploit.crossing_fraction()},
      {"timeouts", r.stuck.timeouts},
      {"traps", r.stuck.traps},
      {"traps_found", r.stuck.traps_found},
      {"false_positives", r.stuck.false_positives},
  };
  if (r.exploit.mean_path_with_crossing) {
    level["mean_path_with_crossing"] = *r.exploit.mean_path_with_crossing;
  }
  if (r.exploit.mean_path_without_crossing) {
    level["mean_path_without_crossing"] = *r.exploit.mean_path_without_crossing;
  }
  o << level.dump() << '\n';
  for (const auto& d : r.exploit.defects) {
    o << nlohmann::json{{"record", "defect"}, {"box", d.box}, {"crossings", d.crossings}}
             .dump()
      << '\n';
  }
  for (const auto& c : r.stuck.clusters) {
    o << nlohmann::json{{"record", "cluster"},
                        {"x", c.centroid.x},
                        {"z", c.centroid.z},
                        {"count", c.count},
                        {"share", c.share},
                        {"cells", c.cells},
                        {"trap", c.trap}}
             .dump()
      << '\n';
  }
  return o.str();
}

std::vector<ReportRow> build_report(std::span<const fs::path> dirs) {
  std::vector<ReportRow> rows;
  for (const fs::path& raw : dirs) {
    fs::path dir = raw.lexically_normal();
    if (dir.filename().empty()) dir = dir.parent_path();
    std::vector<fs::path> curves;
    if (fs::is_regular_file(dir / "curve.csv")) {
      curves.push_back(dir / "curve.csv");
    } else if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() &&
            entry.path().filename().string().rfind("seed_", 0) == 0 &&
            fs::is_regular_file(entry.path() / "curve.csv")) {
          curves.push_back(entry.path() / "curve.csv");
        }
      }
      std::sort(curves.begin(), curves.end());
    }
    if (curves.empty()) throw std::runtime_error("no curve.csv in " + raw.string());
    std::vector<std::vector<CurvePoint>> data;
    for (const auto& c : curves) {
      try {
        data.push_back(read_curve_csv(c));
      } catch (const std::exception& e) {
        throw std::runtime_error(raw.string() + ": " + e.what());
      }
    }
    ReportRow row;
    row.name = dir.filename().string();
    row.seeds = static_cast<int>(data.size());
    try {
      const auto median = median_curve(data);
      row.difficulty = difficulty(std::span<const CurvePoint>(median));
    } catch (const std::exception& e) {
      throw std::runtime_error(raw.string() + ": " + e.what());
    }
    row.difficulty.seeds = row.seeds;
    rows.push_back(row);
  }
  return rows;
}

std::string report_table(std::span<const ReportRow> rows) {
  std::ostringstream o;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-24s %5s %12s %16s %16s\n", "level", "seeds",
                "max_reward", "frames_to_50pct", "frames_to_80pct");
  o << buf;
  auto cell = [](const std::optional<std::uint64_t>& v) {
    return v ? std::to_string(*v) : std::string("never");
  };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-24s %5d %12.3f %16s %16s\n", r.name.c_str(),
                  r.seeds, r.difficulty.max_smoothed_reward,
                  cell(r.difficulty.frames_to_50pct).c_str(),
                  cell(r.difficulty.frames_to_80pct).c_str());
    o << buf;
  }
  return o.str();
}

}  // namespace playtest
