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

#include "playtest/trainer.hpp"

#include <chrono>
#include <deque>
#include <numeric>

namespace playtest {

int steps_per_env(const TrainConfig& cfg) {
  return (cfg.horizon + cfg.envs_per_worker - 1) / cfg.envs_per_worker;
}

std::uint64_t params_seed(std::uint64_t run_seed) { return derive_seed(run_seed, 0); }
std::uint64_t shuffle_seed(std::uint64_t run_seed) { return derive_seed(run_seed, 1); }
std::uint64_t worker_seed(std::uint64_t run_seed, std::uint32_t worker_index) {
  return derive_seed(run_seed, 100 + worker_index);
}

LocalRolloutSource::LocalRolloutSource(const LevelSpec& level,
                                       const EnvConfig& env,
                                       const TrainConfig& train,
                                       std::uint64_t seed)
    : worker_(level, env, train.envs_per_worker, steps_per_env(train), seed) {}

void LocalRolloutSource::publish(const PolicyParams& snapshot) {
  snapshot_ = snapshot;
}

std::vector<Chunk> LocalRolloutSource::collect(std::size_t min_decisions) {
  std::vector<Chunk> chunks;
  std::size_t have = 0;
  do {
    Chunk c;
    c.worker_id = 0;
    c.seq = seq_++;
    c.policy_version = snapshot_.version();
    c.trajectories = worker_.collect(snapshot_, ActorMode::kSample);
    have += c.decisions();
    chunks.push_back(std::move(c));
  } while (have < min_decisions);
  return chunks;
}

TrainResult train([[maybe_unused]] const LevelSpec& level, const EnvConfig& env,
                  const TrainConfig& cfg, std::uint64_t seed,
                  RolloutSource& source, const TrainHooks& hooks) {
  env.validate();
  cfg.validate();
  using Clock = std::chrono::steady_clock;

  TrainResult result;
  Architecture arch;
  arch.hidden = cfg.hidden;
  result.params = PolicyParams::initialized(arch, params_seed(seed), cfg.log_std_init);
  result.throughput.action_repeat = env.action_repeat;
  AdamState adam;
  Rng shuffle(shuffle_seed(seed));
  EpisodeTracker tracker(env.action_repeat);
  std::deque<double> recent;
  std::uint64_t episodes = 0;
  std::uint64_t last_saved = ~std::uint64_t{0};

  auto save = [&] {
    if (hooks.on_checkpoint && last_saved != result.params.version()) {
      hooks.on_checkpoint(result.params);
    }
    last_saved = result.params.version();
  };
  save();
  source.publish(result.params.quantized());

  while (result.env_frames < cfg.frame_budget) {
    if (hooks.should_stop && hooks.should_stop()) break;
    const auto t0 = Clock::now();
    std::vector<Chunk> chunks = source.collect(static_cast<std::size_t>(cfg.horizon));
    const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (chunks.empty()) break;  // source was stopped
    order_chunks(chunks);

    const std::uint64_t frames_before = result.env_frames;
    std::vector<Trajectory> trajs;
    std::vector<EpisodeEndRecord> finished;
    std::uint64_t decisions = 0;
    for (const auto& c : chunks) {
      tracker.consume(c, frames_before + decisions * env.action_repeat, finished);
      decisions += c.decisions();
      trajs.insert(trajs.end(), c.trajectories.begin(), c.trajectories.end());
    }
    result.env_frames += decisions * static_cast<std::uint64_t>(env.action_repeat);
    result.throughput.decisions += decisions;
    result.throughput.seconds += seconds;

    for (const auto& e : finished) {
      recent.push_back(e.episode_return);
      if (recent.size() > kRewardWindow) recent.pop_front();
    }
    episodes += finished.size();
    CurvePoint point;
    point.env_frames = result.env_frames;
    point.episodes = episodes;
    point.mean_episode_reward =
        recent.empty() ? 0.0
                       : std::accumulate(recent.begin(), recent.end(), 0.0) /
                             static_cast<double>(recent.size());
    if (hooks.record_timing && seconds > 0.0) {
      point.steps_per_sec =
          static_cast<double>(decisions * env.action_repeat) / seconds;
    }
    result.curve.push_back(point);

    Batch batch = make_batch(trajs, cfg.gamma, cfg.lambda);
    const UpdateStats stats =
        ppo_update(result.params, adam, std::move(batch), cfg, shuffle);
    ++result.iterations;
    result.episodes.insert(result.episodes.end(), finished.begin(), finished.end());

    if (hooks.on_iteration) {
      IterationReport rep;
      rep.iteration = result.iterations;
      rep.frames_before = frames_before;
      rep.frames_after = result.env_frames;
      rep.chunks = &chunks;
      rep.finished = &finished;
      rep.curve_point = &result.curve.back();
      rep.stats = &stats;
      rep.params = &result.params;
      hooks.on_iteration(rep);
    }
    if (result.iterations % cfg.checkpoint_interval == 0) save();
    source.publish(result.params.quantized());
  }
  save();
  source.finish();
  return result;
}

}  // namespace playtest
