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

// playtest: bake, train, eval, serve, work, report, heatmap.

#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "playtest/app.hpp"
#include "playtest/navmesh.hpp"
#include "playtest/net.hpp"

namespace fs = std::filesystem;
using namespace playtest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

bool stop_requested() { return g_stop.load(); }

void log_line(const std::string& msg) {
  std::fprintf(stderr, "[playtest] %s\n", msg.c_str());
}

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string listen;
  std::string connect;
};

RunConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError(0, "--config is required");
  RunConfig cfg = load_run_config(g.config);
  if (!g.out.empty()) {
    cfg.out = fs::absolute(g.out).string();
  }
  if (g.seed) cfg.seeds = {*g.seed};
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_bake(const Globals& g) {
  const RunConfig cfg = load(g);
  const LevelSpec level = load_config_level(cfg);
  NavBakeConfig bc;
  bc.physics = cfg.env.physics;
  const NavGrid grid = bake(level, bc);
  const fs::path out = cfg.out_path() / "navmesh.pgm";
  write_file(out, to_pgm(grid));
  std::printf("navmesh %dx%d cells, %zu walkable -> %s\n", grid.nx(), grid.nz(),
              grid.walkable_count(), out.string().c_str());
  return kExitOk;
}

int cmd_train(const Globals& g) {
  const RunConfig cfg = load(g);
  const LevelSpec level = load_config_level(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = seed_dir(cfg.out_path(), seed);
    log_line("training seed " + std::to_string(seed) + " -> " + dir.string());
    TrainRunOptions opts;
    opts.should_stop = stop_requested;
    opts.log = log_line;
    const TrainArtifacts art = run_training(cfg, level, seed, dir, opts);
    std::printf("seed %llu: %d iterations, %llu frames, final reward %.4f\n",
                static_cast<unsigned long long>(seed), art.result.iterations,
                static_cast<unsigned long long>(art.result.env_frames),
                art.result.curve.empty() ? 0.0
                                         : art.result.curve.back().mean_episode_reward);
    if (stop_requested()) break;
  }
  return kExitOk;
}

int cmd_eval(const Globals& g, const std::string& policy, const std::string& checkpoint,
             int episodes) {
  const RunConfig cfg = load(g);
  const LevelSpec level = load_config_level(cfg);
  EvalOptions opts;
  opts.policy = policy.empty() ? eval_policy_for(cfg.mode) : parse_eval_policy(policy);
  opts.episodes = episodes > 0 ? episodes : cfg.analytics.eval_episodes;
  opts.seed = cfg.seeds.front();
  if (!checkpoint.empty()) {
    opts.checkpoint = checkpoint;
  } else if (!cfg.checkpoint.empty()) {
    opts.checkpoint = cfg.checkpoint_path();
  } else {
    opts.checkpoint = seed_dir(cfg.out_path(), opts.seed) / "policy.ptfg";
  }
  const EvalReport rep = run_eval(cfg, level, opts);
  const std::string text = eval_text(rep);
  std::fputs(text.c_str(), stdout);
  const fs::path dir = cfg.out_path() / ("eval_" + std::string(to_string(opts.policy)));
  write_file(dir / "report.txt", text);
  write_file(dir / "report.jsonl", eval_jsonl(rep));
  export_heatmap(rep.heatmap, dir / "heatmap.pgm");
  return kExitOk;
}

int cmd_heatmap(const Globals& g, const std::string& policy, const std::string& checkpoint,
                int episodes, const std::string& output) {
  const RunConfig cfg = load(g);
  const LevelSpec level = load_config_level(cfg);
  EvalOptions opts;
  opts.policy = policy.empty() ? eval_policy_for(cfg.mode) : parse_eval_policy(policy);
  opts.episodes = episodes > 0 ? episodes : cfg.analytics.eval_episodes;
  opts.seed = cfg.seeds.front();
  opts.checkpoint = !checkpoint.empty() ? fs::path(checkpoint)
                    : !cfg.checkpoint.empty()
                        ? cfg.checkpoint_path()
                        : seed_dir(cfg.out_path(), opts.seed) / "policy.ptfg";
  const EvalReport rep = run_eval(cfg, level, opts);
  const fs::path out = output.empty()
                           ? cfg.out_path() / ("heatmap_" + std::string(to_string(opts.policy)) + ".pgm")
                           : fs::path(output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  export_heatmap(rep.heatmap, out);
  std::printf("heatmap %dx%d, %llu visits, entropy %.4f nats -> %s\n", rep.heatmap.nx(),
              rep.heatmap.nz(), static_cast<unsigned long long>(rep.heatmap.total()),
              rep.coverage_entropy, out.string().c_str());
  return kExitOk;
}

int cmd_serve(const Globals& g) {
  const RunConfig cfg = load(g);
  const LevelSpec level = load_config_level(cfg);
  const std::uint64_t seed = cfg.seeds.front();
  const net::Endpoint ep = net::parse_endpoint(g.listen.empty() ? cfg.net.listen : g.listen);
  net::ServeConfig sc;
  sc.staleness_limit = cfg.net.staleness_limit;
  sc.log = log_line;
  sc.should_stop = stop_requested;
  net::RemoteRolloutSource source(ep, net::make_hello(level), cfg.env, sc);
  log_line("listening on " + ep.host + ":" + std::to_string(source.port()));
  TrainRunOptions opts;
  opts.source = &source;
  opts.should_stop = stop_requested;
  opts.log = log_line;
  const TrainArtifacts art = run_training(cfg, level, seed, seed_dir(cfg.out_path(), seed), opts);
  const net::ServerStats st = source.stats();
  for (const auto& w : st.workers) {
    std::printf("worker %u: %llu chunks, %llu frames, %llu dropped, %.1f steps/s reported\n",
                w.worker_id, static_cast<unsigned long long>(w.chunks),
                static_cast<unsigned long long>(w.frames),
                static_cast<unsigned long long>(w.dropped_chunks), w.reported_steps_per_sec);
  }
  std::printf("aggregate %.1f steps/s, %d iterations, %llu frames\n",
              st.aggregate_steps_per_sec(), art.result.iterations,
              static_cast<unsigned long long>(art.result.env_frames));
  return kExitOk;
}

int cmd_work(const Globals& g) {
  const RunConfig cfg = load(g);
  const LevelSpec level = load_config_level(cfg);
  net::WorkOptions opts;
  opts.connect = net::parse_endpoint(g.connect.empty() ? cfg.net.connect : g.connect);
  opts.seed = net::worker_seed_from_env(
      worker_seed(cfg.seeds.front(), static_cast<std::uint32_t>(cfg.net.worker_index)));
  opts.should_stop = stop_requested;
  opts.log = log_line;
  const net::WorkResult r = net::work(level, cfg.env, cfg.train, opts);
  std::printf("worker done: %llu chunks, %llu decisions, %d connection(s)\n",
              static_cast<unsigned long long>(r.chunks),
              static_cast<unsigned long long>(r.decisions), r.connections);
  return kExitOk;
}

int cmd_report(const Globals& g, const std::vector<std::string>& dirs) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const auto rows = build_report(paths);
  const std::string table = report_table(rows);
  std::fputs(table.c_str(), stdout);
  if (!g.out.empty()) write_file(fs::path(g.out) / "report.txt", table);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automated playtesting: train agents, find defects, compare levels."};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Run config file");
  app.add_option("--out", g.out, "Output directory (overrides run.out)");
  auto* seed_opt = app.add_option("--seed", seed, "Single seed (overrides run.seeds)");
  app.add_option("--listen", g.listen, "Trainer address host:port");
  app.add_option("--connect", g.connect, "Trainer address host:port");

  auto* bake = app.add_subcommand("bake", "Bake the navmesh and write it as PGM");
  auto* train = app.add_subcommand("train", "Train one policy per seed in-process");
  auto* eval = app.add_subcommand("eval", "Evaluate a policy and report defects");
  auto* serve = app.add_subcommand("serve", "Train with remote rollout workers");
  auto* work = app.add_subcommand("work", "Run a rollout worker");
  auto* report = app.add_subcommand("report", "Compare level difficulty across runs");
  auto* heatmap = app.add_subcommand("heatmap", "Write a coverage heatmap");

  std::string policy;
  std::string checkpoint;
  int episodes = 0;
  std::string heatmap_out;
  for (auto* sub : {eval, heatmap}) {
    sub->add_option("--policy", policy, "scripted, random or rl (default from run.mode)");
    sub->add_option("--checkpoint", checkpoint, "Checkpoint for rl");
    sub->add_option("--episodes", episodes, "Episode count (default analytics.eval_episodes)");
  }
  heatmap->add_option("-o,--output", heatmap_out, "PGM path");
  std::vector<std::string> dirs;
  report->add_option("dirs", dirs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    if (*bake) return cmd_bake(g);
    if (*train) return cmd_train(g);
    if (*eval) return cmd_eval(g, policy, checkpoint, episodes);
    if (*serve) return cmd_serve(g);
    if (*work) return cmd_work(g);
    if (*report) return cmd_report(g, dirs);
    if (*heatmap) return cmd_heatmap(g, policy, checkpoint, episodes, heatmap_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
